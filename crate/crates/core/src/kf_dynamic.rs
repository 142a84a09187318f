//! Bilinear state-dependent travel-time model and its Kalman filter.
//!
//! The scalar model, with `j = l = regression_no`, is
//!
//! ```text
//! X(m) = mu - sum_i phi_i X(m-i) + xi(m) + sum_i psi_i xi(m-i) + w(m-1)
//! psi_i = b_i + sum_z c_iz X(m-z)
//! ```
//!
//! where `m` is the position of an edge along a path, `xi` is an
//! exploration input and `mu` the running mean of the edge's estimates. In
//! state-space form the state is
//! `s = (1, xi(m-l+1)..xi(m), X(m-j+1)..X(m))`, of dimension
//! `2 * regression_no + 1`: a constant slot, a shift register of exploration
//! inputs and a shift register of travel times. `F(s)` shifts both registers
//! and puts the model row last; `V` injects the new `xi` into the newest
//! exploration slot and the newest travel-time slot; `G` and `H` select the
//! newest travel-time slot.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::FilterError;
use crate::EPS_TIME;

pub const DEFAULT_PHI: f64 = 0.2;
/// Mean and standard deviation of the drawn `b` and `c` coefficients.
pub const DEFAULT_COEFF_MEAN: f64 = 0.1;
pub const DEFAULT_COEFF_STD: f64 = 0.1;
pub const DEFAULT_XI_MEAN: f64 = 0.1;
pub const DEFAULT_XI_STD: f64 = 0.1;
pub const DEFAULT_Q_STD: f64 = 0.5;
pub const DEFAULT_R_STD: f64 = 0.2;
pub const DEFAULT_P0: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct BilinearParams {
    regression_no: usize,
    /// `phi[i - 1]` weighs `X(m - i)`.
    phi: Vec<f64>,
    /// `b[i - 1]` weighs `xi(m - i)`.
    b: Vec<f64>,
    /// `c[r - 1][z - 1]` weighs `xi(m - r) X(m - z)`.
    c: Vec<Vec<f64>>,
    pub xi_mean: f64,
    pub xi_std: f64,
    pub q_std: f64,
    pub r_std: f64,
}

impl BilinearParams {
    pub fn new(
        phi: Vec<f64>,
        b: Vec<f64>,
        c: Vec<Vec<f64>>,
        xi_mean: f64,
        xi_std: f64,
        q_std: f64,
        r_std: f64,
    ) -> Result<Self, FilterError> {
        let n = phi.len();
        if n == 0 {
            return Err(FilterError::BadParams("regression_no must be >= 1"));
        }
        if b.len() != n || c.len() != n || c.iter().any(|row| row.len() != n) {
            return Err(FilterError::BadParams(
                "phi, b and c must all be sized by regression_no",
            ));
        }
        let finite = phi
            .iter()
            .chain(&b)
            .chain(c.iter().flatten())
            .chain([xi_mean, xi_std, q_std, r_std].iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(FilterError::BadParams("coefficients must be finite"));
        }
        if xi_std < 0.0 {
            return Err(FilterError::NegativeVariance {
                name: "xi_std",
                value: xi_std,
            });
        }
        if q_std < 0.0 {
            return Err(FilterError::NegativeVariance {
                name: "q_std",
                value: q_std,
            });
        }
        if r_std < 0.0 {
            return Err(FilterError::NegativeVariance {
                name: "r_std",
                value: r_std,
            });
        }
        Ok(BilinearParams {
            regression_no: n,
            phi,
            b,
            c,
            xi_mean,
            xi_std,
            q_std,
            r_std,
        })
    }

    /// Default parameter set: every `phi_i = 0.2`, `b` and `c` drawn once
    /// from `N(0.1, 0.1)`.
    pub fn draw<R: Rng + ?Sized>(regression_no: usize, rng: &mut R) -> Result<Self, FilterError> {
        let normal = Normal::new(DEFAULT_COEFF_MEAN, DEFAULT_COEFF_STD)
            .map_err(|_| FilterError::BadParams("coefficient distribution"))?;
        let b = (0..regression_no).map(|_| normal.sample(rng)).collect();
        let c = (0..regression_no)
            .map(|_| (0..regression_no).map(|_| normal.sample(rng)).collect())
            .collect();
        Self::new(
            vec![DEFAULT_PHI; regression_no],
            b,
            c,
            DEFAULT_XI_MEAN,
            DEFAULT_XI_STD,
            DEFAULT_Q_STD,
            DEFAULT_R_STD,
        )
    }

    /// [`draw`](Self::draw) from a ChaCha8 stream seeded with `seed`.
    pub fn draw_seeded(regression_no: usize, seed: u64) -> Result<Self, FilterError> {
        use rand::SeedableRng;
        Self::draw(regression_no, &mut rand_chacha::ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn regression_no(&self) -> usize {
        self.regression_no
    }

    pub fn dim(&self) -> usize {
        2 * self.regression_no + 1
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[Vec<f64>] {
        &self.c
    }

    /// Slot of `xi(m - i)` in `s(m - 1)`, `i` in `1..=l`.
    fn xi_slot(&self, i: usize) -> usize {
        self.regression_no + 1 - i
    }

    /// Slot of `X(m - z)` in `s(m - 1)`, `z` in `1..=j`.
    fn x_slot(&self, z: usize) -> usize {
        2 * self.regression_no + 1 - z
    }

    fn newest_xi_slot(&self) -> usize {
        self.regression_no
    }

    fn newest_x_slot(&self) -> usize {
        2 * self.regression_no
    }
}

/// How the exploration input is supplied at prediction time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum XiMode {
    /// Always the configured mean.
    #[default]
    Deterministic,
    /// A fresh `N(xi_mean, xi_std)` draw per prediction.
    Stochastic,
}

impl XiMode {
    pub fn input<R: Rng + ?Sized>(self, params: &BilinearParams, rng: &mut R) -> f64 {
        match self {
            XiMode::Deterministic => params.xi_mean,
            XiMode::Stochastic => match Normal::new(params.xi_mean, params.xi_std) {
                Ok(normal) => normal.sample(rng),
                Err(_) => params.xi_mean,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BilinearState {
    s: DVector<f64>,
    p: DMatrix<f64>,
    m: u64,
    mu: f64,
    last_innovation: f64,
    filled: usize,
}

impl BilinearState {
    /// Initial state `E[s(0)]`: constant 1, exploration slots at their mean,
    /// travel-time slots at `prior_mean`. The constant slot has zero
    /// variance; the others start uncorrelated.
    pub fn new(params: &BilinearParams, prior_mean: f64, p0: f64) -> Self {
        let n = params.dim();
        let l = params.regression_no();
        let mut s = DVector::from_element(n, prior_mean);
        let mut p = DMatrix::zeros(n, n);
        s[0] = 1.0;
        for i in 1..=l {
            s[i] = params.xi_mean;
            p[(i, i)] = params.xi_std * params.xi_std;
        }
        for i in l + 1..n {
            p[(i, i)] = p0;
        }
        BilinearState {
            s,
            p,
            m: 0,
            mu: prior_mean,
            last_innovation: 0.0,
            filled: 0,
        }
    }

    /// Builds a state from raw parts. `s[0]` is forced to 1.
    pub fn from_parts(
        params: &BilinearParams,
        mut s: DVector<f64>,
        p: DMatrix<f64>,
        mu: f64,
        last_innovation: f64,
    ) -> Self {
        let n = params.dim();
        assert_eq!(s.len(), n, "state dimension");
        assert_eq!(p.shape(), (n, n), "covariance dimension");
        s[0] = 1.0;
        BilinearState {
            s,
            p,
            m: 0,
            mu,
            last_innovation,
            filled: params.regression_no(),
        }
    }

    pub fn s(&self) -> &DVector<f64> {
        &self.s
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn last_innovation(&self) -> f64 {
        self.last_innovation
    }

    /// Number of travel-time slots holding real history.
    pub fn filled(&self) -> usize {
        self.filled
    }

    /// Current travel-time estimate, the newest travel-time slot.
    pub fn estimate(&self) -> f64 {
        self.s[self.s.len() - 1].max(EPS_TIME)
    }

    /// Loads the travel-time register from a history ordered oldest first.
    /// Only the newest `regression_no` values are kept.
    pub fn load_window(&mut self, params: &BilinearParams, history: &[f64]) {
        let j = params.regression_no();
        let take = history.len().min(j);
        for (z, &x) in history.iter().rev().take(take).enumerate() {
            self.s[params.x_slot(z + 1)] = x;
        }
        self.filled = take;
    }

    /// Folds an observation into the running mean without running the
    /// model, for steps where the history is still too short.
    pub fn absorb(&mut self, y: f64) {
        self.mu = running_mean(self.mu, self.m, y);
        self.m += 1;
    }
}

fn running_mean(mean: f64, count: u64, x: f64) -> f64 {
    if count == 0 {
        x
    } else {
        mean + (x - mean) / (count as f64 + 1.0)
    }
}

/// `psi_i = b_i + sum_z c_iz X(m - z)` for `i` in `1..=l`, from the
/// travel-time register of `state`.
pub fn psi(params: &BilinearParams, state: &BilinearState) -> Vec<f64> {
    let j = params.regression_no();
    (1..=j)
        .map(|i| {
            params.b[i - 1]
                + (1..=j)
                    .map(|z| params.c[i - 1][z - 1] * state.s[params.x_slot(z)])
                    .sum::<f64>()
        })
        .collect()
}

/// State-dependent transition matrix `F(s)`.
pub fn build_f(params: &BilinearParams, state: &BilinearState) -> DMatrix<f64> {
    let n = params.dim();
    let l = params.regression_no();
    let mut f = DMatrix::zeros(n, n);
    f[(0, 0)] = 1.0;
    // shift registers; the newest slot of each is refilled elsewhere
    for row in 1..l {
        f[(row, row + 1)] = 1.0;
    }
    for row in l + 1..n - 1 {
        f[(row, row + 1)] = 1.0;
    }
    let last = n - 1;
    f[(last, 0)] = state.mu;
    for (i, psi_i) in psi(params, state).into_iter().enumerate() {
        f[(last, params.xi_slot(i + 1))] = psi_i;
    }
    for (i, phi_i) in params.phi.iter().enumerate() {
        f[(last, params.x_slot(i + 1))] = -phi_i;
    }
    f
}

/// Input vector `V`: ones in the newest exploration and travel-time slots.
pub fn input_vector(params: &BilinearParams) -> DVector<f64> {
    let mut v = DVector::zeros(params.dim());
    v[params.newest_xi_slot()] = 1.0;
    v[params.newest_x_slot()] = 1.0;
    v
}

/// Noise vector `G`, equal to `H^T`: selects the newest travel-time slot.
pub fn noise_vector(params: &BilinearParams) -> DVector<f64> {
    let mut g = DVector::zeros(params.dim());
    g[params.newest_x_slot()] = 1.0;
    g
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    pub s: DVector<f64>,
    pub p: DMatrix<f64>,
}

impl Prior {
    pub fn estimate(&self) -> f64 {
        self.s[self.s.len() - 1].max(EPS_TIME)
    }
}

/// Time update: `s- = F s + V xi + G w`, `P- = F P F^T + q^2 G G^T`.
pub fn predict(params: &BilinearParams, state: &BilinearState, xi_input: f64) -> Prior {
    let n = params.dim();
    assert_eq!(state.s.len(), n, "state dimension does not match parameters");
    let f = build_f(params, state);
    let mut s = &f * &state.s;
    s[params.newest_xi_slot()] += xi_input;
    s[params.newest_x_slot()] += xi_input + state.last_innovation;
    let mut p = &f * &state.p * f.transpose();
    let newest = params.newest_x_slot();
    p[(newest, newest)] += params.q_std * params.q_std;
    Prior { s, p }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BilinearUpdate {
    pub state: BilinearState,
    pub innovation: f64,
    /// Set when the innovation variance is zero; the prior is returned.
    pub degenerate: bool,
}

/// Measurement update with a scalar travel-time observation `y`.
pub fn update(
    params: &BilinearParams,
    state: &BilinearState,
    prior: Prior,
    y: f64,
) -> BilinearUpdate {
    let n = params.dim();
    let newest = params.newest_x_slot();
    let innovation = y - prior.s[newest];
    let innovation_var = prior.p[(newest, newest)] + params.r_std * params.r_std;

    if innovation_var == 0.0 {
        let mut s = prior.s;
        s[0] = 1.0;
        return BilinearUpdate {
            state: BilinearState {
                s,
                p: prior.p,
                m: state.m + 1,
                mu: state.mu,
                last_innovation: state.last_innovation,
                filled: state.filled,
            },
            innovation,
            degenerate: true,
        };
    }

    let gain: DVector<f64> = prior.p.column(newest) / innovation_var;
    let mut s = prior.s + &gain * innovation;
    // (I - K H) P-, with H picking one row
    let mut p = &prior.p - &gain * prior.p.row(newest);
    for r in 0..n {
        for c in r + 1..n {
            let avg = 0.5 * (p[(r, c)] + p[(c, r)]);
            p[(r, c)] = avg;
            p[(c, r)] = avg;
        }
    }
    s[0] = 1.0;
    let estimate = s[newest].max(EPS_TIME);
    BilinearUpdate {
        state: BilinearState {
            s,
            p,
            m: state.m + 1,
            mu: running_mean(state.mu, state.m, estimate),
            last_innovation: innovation,
            filled: state.filled,
        },
        innovation,
        degenerate: false,
    }
}

/// Travel-time estimate for one edge query.
///
/// With fewer than `regression_no` values of history the model cannot be
/// formed and the edge's running mean is returned (which starts at the
/// heuristic cost it was initialised with). Otherwise the state is
/// predicted and, when an observation is available, corrected with it.
pub fn estimate_edge(
    params: &BilinearParams,
    state: &BilinearState,
    y_obs: Option<f64>,
    xi_input: f64,
) -> f64 {
    if state.filled < params.regression_no() {
        return state.mu.max(EPS_TIME);
    }
    let prior = predict(params, state, xi_input);
    match y_obs {
        Some(y) => update(params, state, prior, y).state.estimate(),
        None => prior.estimate(),
    }
}
