use super::error_fn::ErrorFn;
use super::ols::{normal_equations, ols_fit, FitResult};
use crate::distributions::Dataset;
use crate::error::{invalid, Error, Result};
use crate::numerics::linalg::{dot, norm};
use crate::numerics::{sym_eigen, RngStream, Spectrum, SINGULAR_RTOL};
use crate::truncation::{trimmed_sum_fast, TrimLevel};

/// `k = clamp(round(8 ln(4 / delta)), 1, floor(n / 8))`.
pub fn trim_level_for_delta(delta: f64, n: usize) -> Result<TrimLevel> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidLevel(format!("delta must be in (0, 1), got {delta}")));
    }
    if n < 8 {
        return invalid(format!("the trimmed procedure needs n >= 8, got {n}"));
    }
    let k = (8.0 * (4.0 / delta).ln()).round().clamp(1.0, (n / 8) as f64) as usize;
    TrimLevel::new(k, n)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Ols,
    Zero,
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxConfig {
    pub k: TrimLevel,
    pub outer_steps: usize,
    pub inner_steps: usize,
    pub step_size: f64,
    pub tolerance: f64,
    pub init: Init,
    pub record_trace: bool,
}

impl MinMaxConfig {
    pub fn new(k: TrimLevel) -> Self {
        Self {
            k,
            outer_steps: 500,
            inner_steps: 20,
            step_size: 1.0,
            tolerance: 1e-7,
            init: Init::Ols,
            record_trace: false,
        }
    }

    pub fn for_delta(delta: f64, n: usize) -> Result<Self> {
        Ok(Self::new(trim_level_for_delta(delta, n)?))
    }

    fn validate(&self, data: &Dataset) -> Result<()> {
        if self.k.n() != data.n() {
            return invalid(format!("trim level is for n={}, dataset has n={}", self.k.n(), data.n()));
        }
        if self.outer_steps == 0 || self.inner_steps == 0 {
            return invalid("step counts must be positive");
        }
        if !(self.step_size > 0.0) || !(self.tolerance > 0.0) {
            return invalid("step size and tolerance must be positive");
        }
        if let Init::Given(w) = &self.init {
            if w.len() != data.dim() || w.iter().any(|v| !v.is_finite()) {
                return invalid("initial point must be finite with the dataset's dimension");
            }
        }
        Ok(())
    }
}

/// Buffers for repeated evaluations of `psi_k(w, v)` and its subgradients.
struct Workspace<'a> {
    data: &'a Dataset,
    error: ErrorFn,
    k: usize,
    loss_w: Vec<f64>,
    slope_w: Vec<f64>,
    slope_v: Vec<f64>,
    diffs: Vec<f64>,
    weights: Vec<f64>,
    residual: Vec<f64>,
    scratch: Vec<(f64, usize)>,
}

impl<'a> Workspace<'a> {
    fn new(data: &'a Dataset, error: ErrorFn, k: usize) -> Self {
        let n = data.n();
        Self {
            data,
            error,
            k,
            loss_w: vec![0.0; n],
            slope_w: vec![0.0; n],
            slope_v: vec![0.0; n],
            diffs: vec![0.0; n],
            weights: vec![0.0; n],
            residual: vec![0.0; n],
            scratch: Vec::with_capacity(n),
        }
    }

    fn n(&self) -> f64 {
        self.data.n() as f64
    }

    fn set_w(&mut self, w: &[f64]) -> Result<()> {
        self.data.residuals_into(w, &mut self.residual);
        for i in 0..self.residual.len() {
            self.loss_w[i] = self.error.value(self.residual[i]);
            self.slope_w[i] = self.error.derivative(self.residual[i]);
        }
        match self.loss_w.iter().all(|l| l.is_finite()) {
            true => Ok(()),
            false => check_finite(f64::INFINITY).map(|_| ()),
        }
    }

    /// Subgradient ascent on `psi_k(w, .)` from `v`; returns the best value
    /// and point seen, starting from `(floor, v_floor)`.
    fn ascend(
        &mut self,
        mut v: Vec<f64>,
        steps: usize,
        eta: f64,
        tolerance: f64,
        from_tie: bool,
        counter: &mut usize,
    ) -> Result<(f64, Vec<f64>)> {
        let mut best = (f64::NEG_INFINITY, v.clone());
        for s in 0..steps {
            *counter += 1;
            let ascent = if from_tie && s == 0 {
                best = (0.0, v.clone());
                match self.tie_break_ascent() {
                    Some(g) => g,
                    None => return Ok(best),
                }
            } else {
                let psi = check_finite(self.eval(&v))?;
                if psi > best.0 {
                    best = (psi, v.clone());
                }
                let neg: Vec<f64> = self.slope_v.iter().map(|c| -c).collect();
                self.weighted_sum(&neg)
            };
            if norm(&ascent) <= tolerance {
                return Ok(best);
            }
            v.iter_mut().zip(&ascent).for_each(|(vj, gj)| *vj += eta * gj);
        }
        let psi = check_finite(self.eval(&v))?;
        if psi > best.0 {
            best = (psi, v);
        }
        Ok(best)
    }

    /// Best `psi_k(w, v)` over `v = w +- r q_j / sqrt(lambda_j)` for the
    /// eigenpairs of the Gram matrix and radii `r` from `1e-3` to `1` times
    /// the residual scale, plus `v = fallback`.
    fn probe(&mut self, w: &[f64], gram: &Spectrum, fallback: &[f64], counter: &mut usize) -> Result<(f64, Vec<f64>)> {
        self.data.residuals_into(w, &mut self.residual);
        let rms = (self.residual.iter().map(|r| r * r).sum::<f64>() / self.n()).sqrt();
        let mut best = (check_finite(self.eval(fallback))?, fallback.to_vec());
        *counter += 1;
        let floor = gram.max() * SINGULAR_RTOL;
        for j in 0..gram.dim() {
            let lambda = gram.values[j];
            if !(lambda > floor) {
                continue;
            }
            let q = gram.vector(j);
            for s in 0..=6 {
                let r = rms * 10f64.powf(-0.5 * s as f64) / lambda.sqrt();
                for sign in [1.0, -1.0] {
                    let v: Vec<f64> = w.iter().zip(&q).map(|(a, b)| a + sign * r * b).collect();
                    *counter += 1;
                    let psi = check_finite(self.eval(&v))?;
                    if psi > best.0 {
                        best = (psi, v);
                    }
                }
            }
        }
        Ok(best)
    }

    /// `psi_k(w, v)` for the current `w`; leaves the trim weights in place.
    fn eval(&mut self, v: &[f64]) -> f64 {
        self.data.residuals_into(v, &mut self.residual);
        for i in 0..self.residual.len() {
            let r = self.residual[i];
            self.diffs[i] = self.loss_w[i] - self.error.value(r);
            self.slope_v[i] = self.error.derivative(r);
        }
        trimmed_sum_fast(&self.diffs, self.k, &mut self.weights, &mut self.scratch) / self.n()
    }

    /// `sum_i weight_i coef_i x_i / n`.
    fn weighted_sum(&self, coef: &[f64]) -> Vec<f64> {
        let d = self.data.dim();
        let mut g = vec![0.0; d];
        for (i, (&wt, &c)) in self.weights.iter().zip(coef).enumerate() {
            if wt != 0.0 && c != 0.0 {
                let s = wt * c;
                g.iter_mut().zip(self.data.row(i)).for_each(|(gj, xj)| *gj += s * xj);
            }
        }
        let n = self.n();
        g.iter_mut().for_each(|gj| *gj /= n);
        g
    }

    /// Ascent direction for `psi_k(w, .)` at `v = w`, where every difference
    /// ties. Samples are ordered by their first-order change along each
    /// candidate direction `u`; the direction with the largest positive
    /// directional derivative wins and its subgradient is returned.
    fn tie_break_ascent(&mut self) -> Option<Vec<f64>> {
        let d = self.data.dim();
        let n = self.data.n();
        let neg_slope: Vec<f64> = self.slope_w.iter().map(|s| -s).collect();
        let mut candidates: Vec<Vec<f64>> = Vec::with_capacity(2 * d + 2);
        // descent directions of the plain and of the loss-trimmed empirical error
        self.weights.iter_mut().for_each(|w| *w = 1.0);
        candidates.push(self.weighted_sum(&neg_slope));
        trimmed_sum_fast(&self.loss_w, self.k, &mut self.weights, &mut self.scratch);
        candidates.push(self.weighted_sum(&neg_slope));
        for j in 0..d {
            for sign in [1.0, -1.0] {
                let mut e = vec![0.0; d];
                e[j] = sign;
                candidates.push(e);
            }
        }
        let mut best: Option<(f64, Vec<f64>)> = None;
        for u in candidates {
            let len = norm(&u);
            if !(len > 0.0) {
                continue;
            }
            for i in 0..n {
                self.diffs[i] = -self.slope_w[i] * dot(self.data.row(i), &u) / len;
            }
            let rate = trimmed_sum_fast(&self.diffs, self.k, &mut self.weights, &mut self.scratch) / self.n();
            if rate > 0.0 && best.as_ref().is_none_or(|(b, _)| rate > *b) {
                let grad = self.weighted_sum(&neg_slope);
                best = Some((rate, grad));
            }
        }
        best.map(|(_, g)| g)
    }
}

/// `psi_k(w, v) = n^{-1} phi_k[(e(<w,x_i> - y_i) - e(<v,x_i> - y_i))_i]`.
pub fn psi_k(w: &[f64], v: &[f64], data: &Dataset, error: ErrorFn, k: TrimLevel) -> Result<f64> {
    if w.len() != data.dim() || v.len() != data.dim() {
        return invalid("w and v must match the dataset's dimension");
    }
    if k.n() != data.n() {
        return invalid(format!("trim level is for n={}, dataset has n={}", k.n(), data.n()));
    }
    let mut ws = Workspace::new(data, error, k.k());
    ws.set_w(w)?;
    Ok(ws.eval(v))
}

fn check_finite(value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NumericOverflow(
            "objective is not finite; rescale the responses or lower p".into(),
        ))
    }
}

/// Alternating subgradient descent-ascent for `min_w max_v psi_k(w, v)`.
///
/// Each outer step restarts the adversary at `v = w`, runs `inner_steps` of
/// ascent (keeping the best `v`), then takes one descent step on `w`. The
/// returned `w` minimizes the surrogate `max_v psi_k(w, v)` estimated by the
/// inner loop over all iterates.
pub fn minmax_fit(data: &Dataset, error: ErrorFn, config: &MinMaxConfig) -> Result<FitResult> {
    config.validate(data)?;
    let d = data.dim();
    let ols = ols_fit(data).w_hat;
    let mut w = match &config.init {
        Init::Ols => ols.clone(),
        Init::Zero => vec![0.0; d],
        Init::Given(w0) => w0.clone(),
    };
    let (gram, _) = normal_equations(data);
    let spectrum = sym_eigen(&gram);
    let lambda_max = spectrum.max();
    if !(lambda_max > 0.0) {
        return invalid("all inputs are zero");
    }
    let mut ws = Workspace::new(data, error, config.k.k());
    ws.set_w(&w)?;
    let curvature = match error {
        ErrorFn::Square => 1.0,
        ErrorFn::PPower(_) => {
            let h = ws.residual.iter().map(|t| error.second_derivative(*t)).sum::<f64>() / data.n() as f64;
            if h > 0.0 && h.is_finite() { h } else { 1.0 }
        }
    };
    let base_step = config.step_size / (lambda_max * curvature);
    let mut best_w = w.clone();
    let mut best_surrogate = f64::INFINITY;
    let mut trace = config.record_trace.then(Vec::new);
    let mut inner_total = 0;
    let mut grad_norm = f64::INFINITY;
    let mut iterations = 0;
    let mut adversary: Option<Vec<f64>> = None;
    for t in 1..=config.outer_steps {
        iterations = t;
        let eta = match error {
            ErrorFn::Square => base_step,
            ErrorFn::PPower(_) => base_step / (t as f64).sqrt(),
        };
        ws.set_w(&w)?;
        let (mut psi_best, mut v_best) =
            ws.ascend(w.clone(), config.inner_steps, eta, config.tolerance, true, &mut inner_total)?;
        // the previous adversary often still beats a local restart
        if let Some(prev) = adversary.take() {
            let (psi, v) = ws.ascend(prev, config.inner_steps, eta, config.tolerance, false, &mut inner_total)?;
            if psi > psi_best {
                psi_best = psi;
                v_best = v;
            }
        }
        if psi_best <= 0.0 {
            // local ascent found nothing; look further out before stopping
            let (psi, v) = ws.probe(&w, &spectrum, &ols, &mut inner_total)?;
            if psi > psi_best {
                psi_best = psi;
                v_best = v;
            }
        }
        if psi_best < best_surrogate {
            best_surrogate = psi_best;
            best_w.copy_from_slice(&w);
        }
        if let Some(tr) = trace.as_mut() {
            tr.push(psi_best);
        }
        if psi_best <= 0.0 {
            // no adversary improves on v = w: w is a min-max point
            grad_norm = 0.0;
            break;
        }
        check_finite(ws.eval(&v_best))?;
        let slope_w = ws.slope_w.clone();
        let grad = ws.weighted_sum(&slope_w);
        grad_norm = norm(&grad);
        adversary = Some(v_best);
        if grad_norm <= config.tolerance {
            break;
        }
        w.iter_mut().zip(&grad).for_each(|(wj, gj)| *wj -= eta * gj);
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericOverflow("iterate diverged; lower the step size".into()));
        }
    }
    Ok(FitResult {
        w_hat: best_w,
        iterations,
        inner_iterations: inner_total,
        grad_norm_final: grad_norm,
        objective_trace: trace,
        singular: false,
    })
}

/// `max(0, max_v psi_k(w, v))` over `probes` random `v` around `w` and the
/// least-squares fit: a surrogate optimality check for a fitted `w`.
pub fn certificate(
    w: &[f64],
    data: &Dataset,
    error: ErrorFn,
    k: TrimLevel,
    probes: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    let d = data.dim();
    let scale = 1.0 + norm(w);
    let mut ws = Workspace::new(data, error, k.k());
    ws.set_w(w)?;
    let mut best = ws.eval(&ols_fit(data).w_hat).max(0.0);
    let mut u = vec![0.0; d];
    for _ in 0..probes {
        rng.fill_normal(&mut u);
        let len = norm(&u);
        let r = scale * 10f64.powf(-3.0 * rng.uniform_open()) / len;
        let v: Vec<f64> = w.iter().zip(&u).map(|(a, b)| a + r * b).collect();
        best = best.max(ws.eval(&v));
    }
    check_finite(best)
}
