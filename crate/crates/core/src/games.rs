//! Finite dual-curriculum games.
//!
//! The curricula in this crate mix two level-proposing teachers: with
//! probability `p` the student trains on a level from the first teacher,
//! otherwise on one from the second. Abstracted to a finite matrix game —
//! rows are student strategies, columns are level parameters, entries are
//! returns — that mixture becomes a three-player game: the student picks a
//! row mixture, each teacher picks its own column mixture, and the student's
//! payoff blends the two teacher channels with weight `p`. A teacher either
//! maximises the student's regret (curation) or is indifferent (domain
//! randomisation, a constant utility).
//!
//! The point of the module is numerical verification of the approximation
//! story told by that blend: at any equilibrium of the three-player game,
//! the induced joint teacher mixture is an approximate equilibrium of the
//! plain two-player game, with exploitability bounded by `2Bp(1-p)` for the
//! blended teacher objective and `2B(1-p)` / `2Bp` for each pure objective,
//! where `B` is the largest pointwise gap between the two teacher
//! utilities. Two corollaries fall out: with both teachers curating, `B = 0`
//! and the student is exactly minimax-regret; with one random teacher the
//! student can drift from minimax regret by an amount that a small worked
//! counterexample (`build_table41_game`) realises exactly.
//!
//! These matrices are a verification device for the bounds, not a claim
//! that RL training literally plays a 4x3 game; the RL loops live in
//! [`crate::curricula`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("payoff matrix must be non-empty, rectangular, and finite")]
    InvalidPayoffs,
    #[error("mixing probability must lie in [0, 1], got {0}")]
    InvalidMixing(f64),
    #[error("invalid mixture: {0}")]
    InvalidMixture(String),
    #[error("epsilon must satisfy 0 <= eps < B(1-p)/2 (got eps = {eps}, limit = {limit})")]
    InvalidEpsilon { eps: f64, limit: f64 },
    #[error("no equilibrium within tolerance; best candidate exploitability {exploitability:.3e}")]
    NoEquilibriumFound { best: Box<Equilibrium>, exploitability: f64 },
    #[error("approximation bound violated in the {game} game: exploitability {exploitability:.6} > bound {bound:.6}")]
    BoundViolated { game: String, exploitability: f64, bound: f64 },
}

/// Two-player base game: `payoffs[pi][theta]` is the student's return for
/// pure strategy `pi` on level parameter `theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseGame {
    pub payoffs: Vec<Vec<f64>>,
}

impl BaseGame {
    pub fn new(payoffs: Vec<Vec<f64>>) -> Result<BaseGame, GameError> {
        if payoffs.is_empty() || payoffs[0].is_empty() {
            return Err(GameError::InvalidPayoffs);
        }
        let w = payoffs[0].len();
        for row in &payoffs {
            if row.len() != w || row.iter().any(|x| !x.is_finite()) {
                return Err(GameError::InvalidPayoffs);
            }
        }
        Ok(BaseGame { payoffs })
    }

    pub fn n_strategies(&self) -> usize {
        self.payoffs.len()
    }

    pub fn n_params(&self) -> usize {
        self.payoffs[0].len()
    }

    /// Best pure-strategy return achievable on `theta`.
    pub fn col_max(&self, theta: usize) -> f64 {
        self.payoffs.iter().map(|r| r[theta]).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Expected return of a student mixture on a pure `theta`.
    pub fn value_on(&self, student: &[f64], theta: usize) -> f64 {
        student.iter().zip(&self.payoffs).map(|(w, row)| w * row[theta]).sum()
    }

    /// Expected return of a student mixture against a parameter mixture.
    pub fn value(&self, student: &[f64], theta_mix: &[f64]) -> f64 {
        theta_mix
            .iter()
            .enumerate()
            .map(|(t, w)| w * self.value_on(student, t))
            .sum()
    }

    /// Expected return of pure strategy `i` against a parameter mixture.
    pub fn value_on_col(&self, i: usize, theta_mix: &[f64]) -> f64 {
        theta_mix.iter().enumerate().map(|(t, w)| w * self.payoffs[i][t]).sum()
    }

    /// The regret matrix: entry `[pi][theta]` is how far pure strategy `pi`
    /// falls short of the best pure strategy on `theta`.
    pub fn regret_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.n_strategies())
            .map(|i| (0..self.n_params()).map(|t| self.col_max(t) - self.payoffs[i][t]).collect())
            .collect()
    }
}

/// Regret of a student mixture on one level parameter: the gap to the best
/// pure strategy for that parameter. Always nonnegative; zero exactly when
/// the mixture is supported on argmax strategies.
pub fn regret_of(game: &BaseGame, student: &[f64], theta: usize) -> f64 {
    game.col_max(theta) - game.value_on(student, theta)
}

/// Worst-case regret of a student mixture across all level parameters.
pub fn worst_case_regret(game: &BaseGame, student: &[f64]) -> f64 {
    (0..game.n_params())
        .map(|t| regret_of(game, student, t))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TeacherKind {
    /// Curating teacher: utility is the student's regret on the proposed
    /// parameter.
    Regret,
    /// Randomising teacher: constant utility (fixed to 0), indifferent
    /// between all parameters.
    Uniform,
}

/// The three-player curriculum game: a student against two teachers whose
/// proposals are blended with probability `p` (teacher 1) / `1 - p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualGame {
    pub base: BaseGame,
    pub teacher1: TeacherKind,
    pub teacher2: TeacherKind,
    pub p: f64,
}

impl DualGame {
    pub fn new(
        base: BaseGame,
        teacher1: TeacherKind,
        teacher2: TeacherKind,
        p: f64,
    ) -> Result<DualGame, GameError> {
        if !(0.0..=1.0).contains(&p) || !p.is_finite() {
            return Err(GameError::InvalidMixing(p));
        }
        Ok(DualGame { base, teacher1, teacher2, p })
    }

    /// Largest pointwise gap between the two teacher utilities over pure
    /// profiles (the approximation constant in the bounds).
    pub fn b_constant(&self) -> f64 {
        let reg = self.base.regret_matrix();
        let u = |kind: TeacherKind, i: usize, t: usize| match kind {
            TeacherKind::Regret => reg[i][t],
            TeacherKind::Uniform => 0.0,
        };
        let mut b: f64 = 0.0;
        for i in 0..self.base.n_strategies() {
            for t in 0..self.base.n_params() {
                b = b.max((u(self.teacher1, i, t) - u(self.teacher2, i, t)).abs());
            }
        }
        b
    }

    /// One teacher's utility for a pure parameter against a student mixture.
    pub fn teacher_utility(&self, kind: TeacherKind, student: &[f64], theta: usize) -> f64 {
        match kind {
            TeacherKind::Regret => regret_of(&self.base, student, theta),
            TeacherKind::Uniform => 0.0,
        }
    }

    /// One teacher's expected utility for a parameter mixture.
    pub fn teacher_value(&self, kind: TeacherKind, student: &[f64], theta_mix: &[f64]) -> f64 {
        theta_mix
            .iter()
            .enumerate()
            .map(|(t, w)| w * self.teacher_utility(kind, student, t))
            .sum()
    }

    /// The student's expected utility under both teacher mixtures.
    pub fn student_value(&self, profile: &MixedProfile) -> f64 {
        self.p * self.base.value(&profile.student, &profile.teacher1)
            + (1.0 - self.p) * self.base.value(&profile.student, &profile.teacher2)
    }
}

/// One mixed strategy per player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedProfile {
    pub student: Vec<f64>,
    pub teacher1: Vec<f64>,
    pub teacher2: Vec<f64>,
}

fn check_mixture(mix: &[f64], len: usize, who: &str) -> Result<(), GameError> {
    if mix.len() != len {
        return Err(GameError::InvalidMixture(format!(
            "{who} mixture has {} entries, expected {len}",
            mix.len()
        )));
    }
    if mix.iter().any(|&x| x < -1e-12 || !x.is_finite()) {
        return Err(GameError::InvalidMixture(format!("{who} mixture has negative weight")));
    }
    let s: f64 = mix.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(GameError::InvalidMixture(format!("{who} mixture sums to {s}")));
    }
    Ok(())
}

impl MixedProfile {
    pub fn validate(&self, game: &DualGame) -> Result<(), GameError> {
        check_mixture(&self.student, game.base.n_strategies(), "student")?;
        check_mixture(&self.teacher1, game.base.n_params(), "teacher 1")?;
        check_mixture(&self.teacher2, game.base.n_params(), "teacher 2")
    }

    /// The joint teacher mixture `p*teacher1 + (1-p)*teacher2`.
    pub fn joint_teacher(&self, p: f64) -> Vec<f64> {
        self.teacher1
            .iter()
            .zip(&self.teacher2)
            .map(|(a, b)| p * a + (1.0 - p) * b)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Player {
    Student,
    Teacher1,
    Teacher2,
}

/// Best pure response for one player holding the others at `profile`.
/// Returns the strategy index and its value; ties break toward the lowest
/// index, and the indifferent uniform teacher canonically answers index 0.
pub fn best_response(game: &DualGame, profile: &MixedProfile, player: Player) -> (usize, f64) {
    let argmax = |vals: Vec<f64>| -> (usize, f64) {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, v) in vals.into_iter().enumerate() {
            if v > best.1 + 1e-15 {
                best = (i, v);
            }
        }
        best
    };
    match player {
        Player::Student => {
            let q = profile.joint_teacher(game.p);
            argmax(
                (0..game.base.n_strategies())
                    .map(|i| {
                        let pure = pure_mix(game.base.n_strategies(), i);
                        game.base.value(&pure, &q)
                    })
                    .collect(),
            )
        }
        Player::Teacher1 | Player::Teacher2 => {
            let kind = if player == Player::Teacher1 { game.teacher1 } else { game.teacher2 };
            argmax(
                (0..game.base.n_params())
                    .map(|t| game.teacher_utility(kind, &profile.student, t))
                    .collect(),
            )
        }
    }
}

/// Per-player exploitability: best-response value minus current value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exploitability {
    pub student: f64,
    pub teacher1: f64,
    pub teacher2: f64,
}

impl Exploitability {
    pub fn max(&self) -> f64 {
        self.student.max(self.teacher1).max(self.teacher2)
    }
}

/// Recompute each player's improvement margin from the raw payoffs.
pub fn exploitability(game: &DualGame, profile: &MixedProfile) -> Exploitability {
    let (_, s_best) = best_response(game, profile, Player::Student);
    let s_cur = game.student_value(profile);
    let (_, t1_best) = best_response(game, profile, Player::Teacher1);
    let t1_cur = game.teacher_value(game.teacher1, &profile.student, &profile.teacher1);
    let (_, t2_best) = best_response(game, profile, Player::Teacher2);
    let t2_cur = game.teacher_value(game.teacher2, &profile.student, &profile.teacher2);
    Exploitability {
        student: (s_best - s_cur).max(0.0),
        teacher1: (t1_best - t1_cur).max(0.0),
        teacher2: (t2_best - t2_cur).max(0.0),
    }
}

/// An equilibrium candidate with its independently checkable certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub profile: MixedProfile,
    pub exploitability: Exploitability,
    /// The student's expected utility at the profile.
    pub student_value: f64,
}

fn make_equilibrium(game: &DualGame, profile: MixedProfile) -> Equilibrium {
    let ex = exploitability(game, &profile);
    let student_value = game.student_value(&profile);
    Equilibrium { profile, exploitability: ex, student_value }
}

fn pure_mix(len: usize, idx: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[idx] = 1.0;
    v
}

fn uniform_mix(len: usize) -> Vec<f64> {
    vec![1.0 / len as f64; len]
}

fn uniform_on(len: usize, support: &[usize]) -> Vec<f64> {
    let mut v = vec![0.0; len];
    for &i in support {
        v[i] = 1.0 / support.len() as f64;
    }
    v
}

fn clamp_normalize(mix: &mut [f64]) {
    for x in mix.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let s: f64 = mix.iter().sum();
    if s > 0.0 {
        for x in mix.iter_mut() {
            *x /= s;
        }
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|r| r.len() == n));
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-11 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// All k-element subsets of 0..n in lexicographic order.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k == 0 || k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        // advance
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
        }
        if idx[i] == i + n - k {
            return out;
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Exact solve of the zero-sum game where the row player *minimises*
/// `m[row][col]` and the column player maximises it. Returns
/// `(row_mix, col_mix, value)`. Works by enumerating square kernels
/// (equalising subsystems) — every matrix game has one.
pub fn solve_zero_sum_min(m: &[Vec<f64>]) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    let rows = m.len();
    let cols = m[0].len();
    for k in 1..=rows.min(cols) {
        for s in subsets(rows, k) {
            'tloop: for t in subsets(cols, k) {
                // Row mixture on S equalising the column payoffs over T.
                // Unknowns: pi (k) and the game value v.
                let mut a = vec![vec![0.0; k + 1]; k + 1];
                let mut b = vec![0.0; k + 1];
                for (r, &tj) in t.iter().enumerate() {
                    for (c, &si) in s.iter().enumerate() {
                        a[r][c] = m[si][tj];
                    }
                    a[r][k] = -1.0;
                }
                for c in 0..k {
                    a[k][c] = 1.0;
                }
                b[k] = 1.0;
                let Some(sol_pi) = solve_linear(a, b) else { continue };
                let v = sol_pi[k];

                // Column mixture on T equalising the row payoffs over S.
                let mut a = vec![vec![0.0; k + 1]; k + 1];
                let mut b = vec![0.0; k + 1];
                for (r, &si) in s.iter().enumerate() {
                    for (c, &tj) in t.iter().enumerate() {
                        a[r][c] = m[si][tj];
                    }
                    a[r][k] = -1.0;
                }
                for c in 0..k {
                    a[k][c] = 1.0;
                }
                b[k] = 1.0;
                let Some(sol_th) = solve_linear(a, b) else { continue };
                let w = sol_th[k];

                if (v - w).abs() > 1e-8 {
                    continue;
                }
                if sol_pi[..k].iter().chain(&sol_th[..k]).any(|&x| x < -1e-9) {
                    continue;
                }

                let mut pi = vec![0.0; rows];
                for (c, &si) in s.iter().enumerate() {
                    pi[si] = sol_pi[c];
                }
                let mut th = vec![0.0; cols];
                for (c, &tj) in t.iter().enumerate() {
                    th[tj] = sol_th[c];
                }
                clamp_normalize(&mut pi);
                clamp_normalize(&mut th);

                // Optimality on the full matrix: the minimiser's mixture caps
                // every column at v, the maximiser's floors every row at v.
                for col in 0..cols {
                    let val: f64 = (0..rows).map(|r| pi[r] * m[r][col]).sum();
                    if val > v + 1e-8 {
                        continue 'tloop;
                    }
                }
                for row in 0..rows {
                    let val: f64 = (0..cols).map(|c| th[c] * m[row][c]).sum();
                    if val < v - 1e-8 {
                        continue 'tloop;
                    }
                }
                return Some((pi, th, v));
            }
        }
    }
    None
}

/// The minimax-regret value of a base game and a mixture achieving it,
/// via an exact zero-sum solve on the regret matrix.
pub fn minimax_regret(game: &BaseGame) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    solve_zero_sum_min(&game.regret_matrix())
}

// --- exact equilibrium construction -------------------------------------

fn solve_both_uniform(game: &DualGame) -> Equilibrium {
    let q = uniform_mix(game.base.n_params());
    let (idx, _) = best_response(
        game,
        &MixedProfile {
            student: uniform_mix(game.base.n_strategies()),
            teacher1: q.clone(),
            teacher2: q.clone(),
        },
        Player::Student,
    );
    let profile = MixedProfile {
        student: pure_mix(game.base.n_strategies(), idx),
        teacher1: q.clone(),
        teacher2: q,
    };
    make_equilibrium(game, profile)
}

fn solve_both_regret(game: &DualGame) -> Option<Equilibrium> {
    let (pi, th, _v) = minimax_regret(&game.base)?;
    let profile = MixedProfile { student: pi, teacher1: th.clone(), teacher2: th };
    Some(make_equilibrium(game, profile))
}

/// Candidate student mixtures on support `s`: those equalising the mixture's
/// regret across some parameter subset of the same size, plus the uniform
/// mixture over `s` for degenerate ties.
fn student_candidates(game: &BaseGame, s: &[usize]) -> Vec<Vec<f64>> {
    let k = s.len();
    let n_pi = game.n_strategies();
    let n_th = game.n_params();
    let mut out = Vec::new();
    for t in subsets(n_th, k) {
        // k-1 equalisation rows plus normalisation; regret over theta is
        // col_max(theta) - sum_i x_i V[i][theta].
        let mut a = vec![vec![0.0; k]; k];
        let mut b = vec![0.0; k];
        for r in 1..k {
            for (c, &si) in s.iter().enumerate() {
                a[r - 1][c] = game.payoffs[si][t[r - 1]] - game.payoffs[si][t[r]];
            }
            b[r - 1] = game.col_max(t[r - 1]) - game.col_max(t[r]);
        }
        for c in 0..k {
            a[k - 1][c] = 1.0;
        }
        b[k - 1] = 1.0;
        if let Some(x) = solve_linear(a, b) {
            if x.iter().all(|&w| w > -1e-9) {
                let mut mix = vec![0.0; n_pi];
                for (c, &si) in s.iter().enumerate() {
                    mix[si] = x[c];
                }
                clamp_normalize(&mut mix);
                out.push(mix);
            }
        }
    }
    out.push(uniform_on(n_pi, s));
    out
}

/// Find a joint teacher mixture `q` making support `s` optimal for the
/// student while reserving at least `mass` probability on the parameter set
/// `argmax_set` (where the curating teacher must live). Vertex enumeration
/// over the feasible polytope.
fn find_joint_mixture(game: &BaseGame, s: &[usize], argmax_set: &[usize], mass: f64) -> Option<Vec<f64>> {
    let n_th = game.n_params();
    let n_pi = game.n_strategies();
    if s.len() > n_th {
        return None;
    }
    let base_rows = s.len(); // (|s|-1) indifference + 1 normalisation
    let extra = n_th - base_rows;

    // Optional active constraints for vertex completion.
    enum Active {
        Zero(usize),
        Tie(usize),
        Mass,
    }
    let mut pool = Vec::new();
    for j in 0..n_th {
        pool.push(Active::Zero(j));
    }
    for i in 0..n_pi {
        if !s.contains(&i) {
            pool.push(Active::Tie(i));
        }
    }
    pool.push(Active::Mass);

    for combo in subsets_allowing_empty(pool.len(), extra) {
        let mut a = vec![vec![0.0; n_th]; n_th];
        let mut b = vec![0.0; n_th];
        // Student indifference across s.
        for r in 1..s.len() {
            for j in 0..n_th {
                a[r - 1][j] = game.payoffs[s[r - 1]][j] - game.payoffs[s[r]][j];
            }
        }
        // Normalisation.
        for j in 0..n_th {
            a[s.len() - 1][j] = 1.0;
        }
        b[s.len() - 1] = 1.0;
        // Chosen actives.
        for (row, &pi) in combo.iter().enumerate() {
            let r = base_rows + row;
            match pool[pi] {
                Active::Zero(j) => a[r][j] = 1.0,
                Active::Tie(i) => {
                    for j in 0..n_th {
                        a[r][j] = game.payoffs[i][j] - game.payoffs[s[0]][j];
                    }
                }
                Active::Mass => {
                    for &j in argmax_set {
                        a[r][j] = 1.0;
                    }
                    b[r] = mass;
                }
            }
        }
        let Some(mut q) = solve_linear(a, b) else { continue };
        // Feasibility of the vertex.
        if q.iter().any(|&x| x < -1e-9) {
            continue;
        }
        clamp_normalize(&mut q);
        let common = game.value_on_col(s[0], &q);
        let mut ok = true;
        for i in 0..n_pi {
            if !s.contains(&i) && game.value_on_col(i, &q) > common + 1e-9 {
                ok = false;
                break;
            }
        }
        if !ok {
            continue;
        }
        let on_mass: f64 = argmax_set.iter().map(|&j| q[j]).sum();
        if on_mass < mass - 1e-9 {
            continue;
        }
        return Some(q);
    }
    None
}

/// All subsets of 0..n of size k, where k may be zero (one empty subset).
fn subsets_allowing_empty(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    subsets(n, k)
}

/// Split the joint mixture into the curating teacher's share (supported on
/// `argmax_set`, weight `mass`) and the free teacher's remainder.
fn split_joint(q: &[f64], argmax_set: &[usize], mass: f64) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = q.len();
    if mass <= 1e-12 {
        return Some((uniform_on(n, argmax_set), q.to_vec()));
    }
    let qa: f64 = argmax_set.iter().map(|&j| q[j]).sum();
    if qa < mass - 1e-9 {
        return None;
    }
    let mut reg_side = vec![0.0; n];
    for &j in argmax_set {
        reg_side[j] = q[j] / qa;
    }
    if mass >= 1.0 - 1e-12 {
        // The joint mixture is the curator's alone; the other teacher's
        // channel has zero weight, so hand it the same mixture.
        return Some((reg_side.clone(), reg_side));
    }
    let mut free_side: Vec<f64> = q
        .iter()
        .zip(&reg_side)
        .map(|(&qj, &rj)| (qj - mass * rj) / (1.0 - mass))
        .collect();
    clamp_normalize(&mut free_side);
    Some((reg_side, free_side))
}

fn solve_one_regret(game: &DualGame, tol: f64) -> Option<Equilibrium> {
    let (regret_first, mass) = match (game.teacher1, game.teacher2) {
        (TeacherKind::Regret, TeacherKind::Uniform) => (true, game.p),
        (TeacherKind::Uniform, TeacherKind::Regret) => (false, 1.0 - game.p),
        _ => return None,
    };
    let base = &game.base;
    let n_pi = base.n_strategies();
    for k in 1..=n_pi {
        for s in subsets(n_pi, k) {
            for student in student_candidates(base, &s) {
                let regs: Vec<f64> =
                    (0..base.n_params()).map(|t| regret_of(base, &student, t)).collect();
                let rmax = regs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let argmax_set: Vec<usize> = (0..base.n_params())
                    .filter(|&t| regs[t] >= rmax - 1e-9)
                    .collect();
                let Some(q) = find_joint_mixture(base, &s, &argmax_set, mass) else { continue };
                let Some((reg_side, free_side)) = split_joint(&q, &argmax_set, mass) else {
                    continue;
                };
                let (teacher1, teacher2) = if regret_first {
                    (reg_side, free_side)
                } else {
                    (free_side, reg_side)
                };
                let eq = make_equilibrium(game, MixedProfile { student, teacher1, teacher2 });
                if eq.exploitability.max() <= tol {
                    return Some(eq);
                }
            }
        }
    }
    None
}

/// Enumerate all mixtures over `dim` strategies whose weights are multiples
/// of `1/resolution`.
fn simplex_grid(dim: usize, resolution: usize) -> Vec<Vec<f64>> {
    fn rec(dim: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if dim == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for take in 0..=left {
            cur.push(take);
            rec(dim - 1, left - take, cur, out);
            cur.pop();
        }
    }
    let mut raw = Vec::new();
    rec(dim, resolution, &mut Vec::new(), &mut raw);
    raw.into_iter()
        .map(|counts| counts.into_iter().map(|c| c as f64 / resolution as f64).collect())
        .collect()
}

/// Complete a student mixture to a full profile with best-responding
/// teachers (the indifferent teacher plays exactly uniform).
fn complete_profile(game: &DualGame, student: Vec<f64>) -> MixedProfile {
    let n_th = game.base.n_params();
    let teacher = |kind: TeacherKind| -> Vec<f64> {
        match kind {
            TeacherKind::Uniform => uniform_mix(n_th),
            TeacherKind::Regret => {
                let best = (0..n_th)
                    .max_by(|&a, &b| {
                        regret_of(&game.base, &student, a)
                            .total_cmp(&regret_of(&game.base, &student, b))
                    })
                    .unwrap();
                pure_mix(n_th, best)
            }
        }
    };
    MixedProfile { teacher1: teacher(game.teacher1), teacher2: teacher(game.teacher2), student }
}

/// Search for a Nash equilibrium of the dual game.
///
/// Exact structural solves run first (zero-sum kernel enumeration when both
/// teachers curate, support enumeration with one curator, closed form with
/// two indifferent teachers). If none certifies within `tol`, a grid scan
/// at `grid_resolution` refined by alternating best-response steps reports
/// the best candidate found — inside `Ok` if it certifies, otherwise inside
/// [`GameError::NoEquilibriumFound`].
pub fn find_equilibrium(
    game: &DualGame,
    grid_resolution: usize,
    tol: f64,
) -> Result<Equilibrium, GameError> {
    let exact = match (game.teacher1, game.teacher2) {
        (TeacherKind::Uniform, TeacherKind::Uniform) => Some(solve_both_uniform(game)),
        (TeacherKind::Regret, TeacherKind::Regret) => solve_both_regret(game),
        _ => solve_one_regret(game, tol),
    };
    let mut best: Option<Equilibrium> = None;
    let consider = |eq: Equilibrium, best: &mut Option<Equilibrium>| {
        if best.as_ref().map_or(true, |b| eq.exploitability.max() < b.exploitability.max()) {
            *best = Some(eq);
        }
    };
    if let Some(eq) = exact {
        consider(eq, &mut best);
    }
    if best.as_ref().map_or(false, |b| b.exploitability.max() <= tol) {
        return Ok(best.unwrap());
    }

    // Grid fallback with alternating best-response refinement.
    let res = grid_resolution.max(1);
    for student in simplex_grid(game.base.n_strategies(), res) {
        let profile = complete_profile(game, student);
        let mut cur = profile.clone();
        consider(make_equilibrium(game, profile), &mut best);
        for _ in 0..8 {
            let (idx, _) = best_response(game, &cur, Player::Student);
            let pure = pure_mix(game.base.n_strategies(), idx);
            let blended: Vec<f64> =
                cur.student.iter().zip(&pure).map(|(a, b)| 0.5 * a + 0.5 * b).collect();
            cur = complete_profile(game, blended);
            consider(make_equilibrium(game, cur.clone()), &mut best);
        }
    }
    let best = best.expect("grid always yields candidates");
    if best.exploitability.max() <= tol {
        Ok(best)
    } else {
        let exploitability = best.exploitability.max();
        Err(GameError::NoEquilibriumFound { best: Box::new(best), exploitability })
    }
}

/// One bound check in the approximation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    /// Which base game: "joint", "teacher1", or "teacher2".
    pub game: String,
    pub exploitability: f64,
    pub bound: f64,
    pub margin: f64,
}

/// Result of checking all three approximation bounds for an equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report {
    pub b_constant: f64,
    pub checks: Vec<BoundCheck>,
}

/// Verify the mixed-teacher approximation bounds at an equilibrium: the
/// pair (student, joint teacher mixture) must be a `2Bp(1-p)`-equilibrium
/// of the blended-objective base game, `2B(1-p)` for teacher 1's objective
/// alone, and `2Bp` for teacher 2's.
pub fn verify_theorem1(
    game: &DualGame,
    eq: &Equilibrium,
    tol: f64,
) -> Result<Theorem1Report, GameError> {
    let b = game.b_constant();
    let p = game.p;
    let profile = &eq.profile;
    let q = profile.joint_teacher(p);

    // Student deviation gain is the same in all three checks (the student's
    // utility is the return regardless of the teacher objective).
    let s_cur = game.base.value(&profile.student, &q);
    let s_best = (0..game.base.n_strategies())
        .map(|i| game.base.value_on_col(i, &q))
        .fold(f64::NEG_INFINITY, f64::max);
    let student_gain = (s_best - s_cur).max(0.0);

    let teacher_gain = |w1: f64, w2: f64| -> f64 {
        let util = |t: usize| {
            w1 * game.teacher_utility(game.teacher1, &profile.student, t)
                + w2 * game.teacher_utility(game.teacher2, &profile.student, t)
        };
        let cur: f64 = q.iter().enumerate().map(|(t, wq)| wq * util(t)).sum();
        let best = (0..game.base.n_params()).map(util).fold(f64::NEG_INFINITY, f64::max);
        (best - cur).max(0.0)
    };

    let entries = [
        ("joint", teacher_gain(p, 1.0 - p), 2.0 * b * p * (1.0 - p)),
        ("teacher1", teacher_gain(1.0, 0.0), 2.0 * b * (1.0 - p)),
        ("teacher2", teacher_gain(0.0, 1.0), 2.0 * b * p),
    ];
    let mut checks = Vec::new();
    for (name, tg, bound) in entries {
        let expl = tg.max(student_gain);
        let margin = bound + tol - expl;
        if margin < 0.0 {
            return Err(GameError::BoundViolated {
                game: name.to_string(),
                exploitability: expl,
                bound,
            });
        }
        checks.push(BoundCheck { game: name.to_string(), exploitability: expl, bound, margin });
    }
    Ok(Theorem1Report { b_constant: b, checks })
}

/// The 4x(n+1) counterexample table: two specialist strategies that each
/// ace one hard parameter, and two generalists that trade a bit of regret
/// on the hard parameters for value on the `n - 1` filler columns. Requires
/// `0 <= eps < B(1-p)/2` so the fillers never dominate the regret picture.
pub fn build_table41_game(b: f64, p: f64, eps: f64, n: usize) -> Result<BaseGame, GameError> {
    assert!(b > 0.0, "payoff scale must be positive");
    assert!(n >= 2, "need at least one filler column");
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(GameError::InvalidMixing(p));
    }
    let limit = b * (1.0 - p) / 2.0;
    if !(0.0..limit).contains(&eps) {
        return Err(GameError::InvalidEpsilon { eps, limit });
    }
    let cols = n + 1;
    let filler = b * p / 2.0 + eps;
    let spike = b * p + 2.0 * eps;
    let mut rows = vec![vec![0.0; cols]; 4];
    rows[0][0] = b;
    rows[1][1] = b;
    rows[2][0] = spike;
    rows[3][1] = spike;
    for c in 2..cols {
        rows[2][c] = filler;
        rows[3][c] = filler;
    }
    BaseGame::new(rows)
}

/// The counterexample wrapped as a dual game: a curating first teacher with
/// weight `p` against an indifferent second teacher.
pub fn table41_dual_game(b: f64, p: f64, eps: f64, n: usize) -> Result<DualGame, GameError> {
    DualGame::new(build_table41_game(b, p, eps, n)?, TeacherKind::Regret, TeacherKind::Uniform, p)
}

/// The profile the counterexample is built around: the student mixes evenly
/// over the two generalists, the curating teacher over the two hard
/// parameters, and the indifferent teacher evenly over the filler columns.
pub fn table41_reference_profile(n: usize) -> MixedProfile {
    let cols = n + 1;
    MixedProfile {
        student: uniform_on(4, &[2, 3]),
        teacher1: uniform_on(cols, &[0, 1]),
        teacher2: uniform_on(cols, &(2..cols).collect::<Vec<_>>()),
    }
}
