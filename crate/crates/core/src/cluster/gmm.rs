//! Gaussian mixture models fitted by expectation–maximisation.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const RIDGE_RETRIES: usize = 3;
const LLOYD_ITERS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceKind {
    Full,
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmConfig {
    pub reg_covar: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub n_init: usize,
    pub covariance: CovarianceKind,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            reg_covar: 1e-6,
            max_iter: 100,
            tol: 1e-3,
            n_init: 1,
            covariance: CovarianceKind::Full,
        }
    }
}

/// Per-component covariance, with the ridge already on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    /// Row-major `dim × dim`.
    Full(Vec<f64>),
    Diagonal(Vec<f64>),
}

impl Covariance {
    pub fn diagonal(&self, dim: usize) -> Vec<f64> {
        match self {
            Covariance::Full(m) => (0..dim).map(|i| m[i * dim + i]).collect(),
            Covariance::Diagonal(v) => v.clone(),
        }
    }
}

/// Cached factorisation used for density evaluation.
#[derive(Debug, Clone, PartialEq)]
enum Precision {
    /// Lower Cholesky factor of the covariance, row-major.
    Cholesky(Vec<f64>),
    InvVariances(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
struct Component {
    precision: Precision,
    log_det: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    pub k: usize,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Covariance>,
    /// Mean per-sample log-likelihood after initialisation and after every EM step.
    pub log_likelihood_trace: Vec<f64>,
    pub converged: bool,
    /// Ridge actually used (grows if a covariance turned out singular).
    pub reg_covar: f64,
    components: Vec<Component>,
}

fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut sum = a[i * d + j];
            for p in 0..j {
                sum -= l[i * d + p] * l[j * d + p];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[i * d + i] = sum.sqrt();
            } else {
                l[i * d + j] = sum / l[j * d + j];
            }
        }
    }
    Some(l)
}

impl Component {
    fn new(cov: &Covariance, d: usize) -> Option<Component> {
        match cov {
            Covariance::Full(m) => {
                let l = cholesky(m, d)?;
                let log_det = 2.0 * (0..d).map(|i| l[i * d + i].ln()).sum::<f64>();
                Some(Component {
                    precision: Precision::Cholesky(l),
                    log_det,
                })
            }
            Covariance::Diagonal(v) => {
                if v.iter().any(|&x| x <= 0.0 || !x.is_finite()) {
                    return None;
                }
                Some(Component {
                    precision: Precision::InvVariances(v.iter().map(|x| 1.0 / x).collect()),
                    log_det: v.iter().map(|x| x.ln()).sum(),
                })
            }
        }
    }

    fn log_density(&self, x: &[f64], mean: &[f64], scratch: &mut [f64]) -> f64 {
        let d = x.len();
        let maha = match &self.precision {
            Precision::Cholesky(l) => {
                // Forward substitution: L z = x − μ.
                let mut sum = 0.0;
                for i in 0..d {
                    let mut v = x[i] - mean[i];
                    let row = &l[i * d..i * d + i];
                    for (lij, zj) in row.iter().zip(scratch.iter()) {
                        v -= lij * zj;
                    }
                    let z = v / l[i * d + i];
                    scratch[i] = z;
                    sum += z * z;
                }
                sum
            }
            Precision::InvVariances(inv) => x
                .iter()
                .zip(mean)
                .zip(inv)
                .map(|((xi, mi), p)| (xi - mi) * (xi - mi) * p)
                .sum(),
        };
        -0.5 * (d as f64 * LN_2PI + self.log_det + maha)
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

impl GmmModel {
    /// Weighted log densities `log w_k + log N(x | μ_k, Σ_k)` for one point.
    pub fn weighted_log_densities(&self, x: &[f64]) -> Vec<f64> {
        let mut scratch = vec![0.0; self.dim];
        self.components
            .iter()
            .zip(&self.means)
            .zip(&self.weights)
            .map(|((c, m), w)| w.ln() + c.log_density(x, m, &mut scratch))
            .collect()
    }

    /// Posterior responsibilities for one point.
    pub fn responsibilities(&self, x: &[f64]) -> Vec<f64> {
        let lp = self.weighted_log_densities(x);
        let total = log_sum_exp(&lp);
        lp.iter().map(|v| (v - total).exp()).collect()
    }

    fn from_parts(
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<Covariance>,
        reg_covar: f64,
    ) -> Option<GmmModel> {
        let dim = means.first().map_or(0, Vec::len);
        let components = covariances
            .iter()
            .map(|c| Component::new(c, dim))
            .collect::<Option<Vec<_>>>()?;
        Some(GmmModel {
            k: weights.len(),
            dim,
            weights,
            means,
            covariances,
            log_likelihood_trace: Vec::new(),
            converged: false,
            reg_covar,
            components,
        })
    }

    /// Builds a model from explicit parameters. The covariances are used as
    /// given (no ridge is added).
    pub fn from_parameters(
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<Covariance>,
    ) -> Result<GmmModel> {
        if weights.is_empty() || weights.len() != means.len() || means.len() != covariances.len() {
            return Err(Error::invalid("mismatched mixture parameter lengths"));
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| *w < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "mixture weights must be non-negative and sum to 1",
            ));
        }
        GmmModel::from_parts(weights, means, covariances, 0.0)
            .ok_or_else(|| Error::Numerical("covariance is not positive definite".into()))
    }
}

struct Data {
    n: usize,
    d: usize,
    values: Vec<f64>,
}

impl Data {
    fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(x, center);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// k-means++ seeding followed by a few Lloyd iterations. Returns centres and
/// the hard assignment.
fn kmeans_init<R: Rng>(data: &Data, k: usize, rng: &mut R) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(data.row(rng.random_range(0..data.n)).to_vec());
    let mut d2: Vec<f64> = (0..data.n)
        .map(|i| sq_dist(data.row(i), &centers[0]))
        .collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = data.n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..data.n)
        };
        let c = data.row(pick).to_vec();
        for (i, slot) in d2.iter_mut().enumerate() {
            *slot = slot.min(sq_dist(data.row(i), &c));
        }
        centers.push(c);
    }

    let mut labels: Vec<usize> = (0..data.n)
        .map(|i| nearest(data.row(i), &centers))
        .collect();
    for _ in 0..LLOYD_ITERS {
        let mut sums = vec![vec![0.0; data.d]; k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(data.row(i)) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let next: Vec<usize> = (0..data.n)
            .map(|i| nearest(data.row(i), &centers))
            .collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    (centers, labels)
}

fn pooled_covariance(
    data: &Data,
    centers: &[Vec<f64>],
    labels: &[usize],
    kind: CovarianceKind,
) -> Vec<f64> {
    let d = data.d;
    match kind {
        CovarianceKind::Full => {
            let mut cov = vec![0.0; d * d];
            let mut diff = vec![0.0; d];
            for (i, &l) in labels.iter().enumerate() {
                for (df, (x, m)) in diff.iter_mut().zip(data.row(i).iter().zip(&centers[l])) {
                    *df = x - m;
                }
                for a in 0..d {
                    for b in 0..=a {
                        cov[a * d + b] += diff[a] * diff[b];
                    }
                }
            }
            let n = data.n as f64;
            for a in 0..d {
                for b in 0..=a {
                    let v = cov[a * d + b] / n;
                    cov[a * d + b] = v;
                    cov[b * d + a] = v;
                }
            }
            cov
        }
        CovarianceKind::Diagonal => {
            let mut var = vec![0.0; d];
            for (i, &l) in labels.iter().enumerate() {
                for (v, (x, m)) in var.iter_mut().zip(data.row(i).iter().zip(&centers[l])) {
                    *v += (x - m) * (x - m);
                }
            }
            var.iter().map(|v| v / data.n as f64).collect()
        }
    }
}

fn add_ridge(raw: &[f64], d: usize, kind: CovarianceKind, reg: f64) -> Covariance {
    let mut m = raw.to_vec();
    match kind {
        CovarianceKind::Full => {
            for i in 0..d {
                m[i * d + i] += reg;
            }
            Covariance::Full(m)
        }
        CovarianceKind::Diagonal => {
            m.iter_mut().for_each(|v| *v += reg);
            Covariance::Diagonal(m)
        }
    }
}

/// Builds a model from raw (unregularised) covariances, growing the ridge
/// ×10 up to three times if a factorisation fails.
fn regularised_model(
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    raw_covs: &[Vec<f64>],
    d: usize,
    kind: CovarianceKind,
    reg_covar: &mut f64,
) -> Result<GmmModel> {
    for attempt in 0..=RIDGE_RETRIES {
        let covs: Vec<Covariance> = raw_covs
            .iter()
            .map(|c| add_ridge(c, d, kind, *reg_covar))
            .collect();
        if let Some(model) = GmmModel::from_parts(weights.clone(), means.clone(), covs, *reg_covar)
        {
            return Ok(model);
        }
        if attempt < RIDGE_RETRIES {
            log::warn!(
                "singular covariance, raising reg_covar to {}",
                *reg_covar * 10.0
            );
            *reg_covar *= 10.0;
        }
    }
    Err(Error::Numerical(format!(
        "covariance singular even with reg_covar {reg_covar}"
    )))
}

/// E-step: log responsibilities (row-major `n × k`) and mean log-likelihood.
fn e_step(model: &GmmModel, data: &Data) -> (Vec<f64>, f64) {
    let k = model.k;
    let mut log_resp = vec![0.0; data.n * k];
    let mut total = 0.0;
    for i in 0..data.n {
        let lp = model.weighted_log_densities(data.row(i));
        let norm = log_sum_exp(&lp);
        total += norm;
        for (slot, v) in log_resp[i * k..(i + 1) * k].iter_mut().zip(&lp) {
            *slot = v - norm;
        }
    }
    (log_resp, total / data.n as f64)
}

fn m_step(
    data: &Data,
    log_resp: &[f64],
    k: usize,
    kind: CovarianceKind,
) -> (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let (n, d) = (data.n, data.d);
    let resp: Vec<f64> = log_resp.iter().map(|v| v.exp()).collect();
    let mut nk = vec![0.0; k];
    for i in 0..n {
        for c in 0..k {
            nk[c] += resp[i * k + c];
        }
    }
    // Guard against empty components the same way as the usual 10·eps floor.
    let nk: Vec<f64> = nk.iter().map(|v| v + 10.0 * f64::EPSILON).collect();
    let mut means = vec![vec![0.0; d]; k];
    for i in 0..n {
        let x = data.row(i);
        for c in 0..k {
            let r = resp[i * k + c];
            if r == 0.0 {
                continue;
            }
            for (m, xi) in means[c].iter_mut().zip(x) {
                *m += r * xi;
            }
        }
    }
    for c in 0..k {
        means[c].iter_mut().for_each(|m| *m /= nk[c]);
    }
    let mut covs = Vec::with_capacity(k);
    let mut diff = vec![0.0; d];
    for c in 0..k {
        match kind {
            CovarianceKind::Full => {
                let mut cov = vec![0.0; d * d];
                for i in 0..n {
                    let r = resp[i * k + c];
                    if r == 0.0 {
                        continue;
                    }
                    for (df, (x, m)) in diff.iter_mut().zip(data.row(i).iter().zip(&means[c])) {
                        *df = x - m;
                    }
                    for a in 0..d {
                        let ra = r * diff[a];
                        for b in 0..=a {
                            cov[a * d + b] += ra * diff[b];
                        }
                    }
                }
                for a in 0..d {
                    for b in 0..=a {
                        let v = cov[a * d + b] / nk[c];
                        cov[a * d + b] = v;
                        cov[b * d + a] = v;
                    }
                }
                covs.push(cov);
            }
            CovarianceKind::Diagonal => {
                let mut var = vec![0.0; d];
                for i in 0..n {
                    let r = resp[i * k + c];
                    for (v, (x, m)) in var.iter_mut().zip(data.row(i).iter().zip(&means[c])) {
                        *v += r * (x - m) * (x - m);
                    }
                }
                var.iter_mut().for_each(|v| *v /= nk[c]);
                covs.push(var);
            }
        }
    }
    let weights = nk.iter().map(|v| v / n as f64).collect::<Vec<_>>();
    let wsum: f64 = weights.iter().sum();
    (weights.into_iter().map(|w| w / wsum).collect(), means, covs)
}

fn fit_once(data: &Data, k: usize, seed: u64, init: usize, cfg: &GmmConfig) -> Result<GmmModel> {
    let mut rng = rng::stream(seed, &format!("gmm-init/{init}"));
    let (centers, labels) = kmeans_init(data, k, &mut rng);
    let pooled = pooled_covariance(data, &centers, &labels, cfg.covariance);
    let mut reg = cfg.reg_covar;
    let raw = vec![pooled; k];
    let mut model = regularised_model(
        vec![1.0 / k as f64; k],
        centers,
        &raw,
        data.d,
        cfg.covariance,
        &mut reg,
    )?;

    let (mut log_resp, mut ll) = e_step(&model, data);
    let mut trace = vec![ll];
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        let (weights, means, raw_covs) = m_step(data, &log_resp, k, cfg.covariance);
        model = regularised_model(weights, means, &raw_covs, data.d, cfg.covariance, &mut reg)?;
        let (next_resp, next_ll) = e_step(&model, data);
        trace.push(next_ll);
        let change = (next_ll - ll).abs();
        log_resp = next_resp;
        let prev = ll;
        ll = next_ll;
        if change < cfg.tol * prev.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    model.log_likelihood_trace = trace;
    model.converged = converged;
    Ok(model)
}

/// Fits a `k`-component mixture to `rows`. Initialisation is seeded
/// k-means++ plus Lloyd refinement for the means, uniform weights and the
/// pooled within-cluster covariance; EM then runs until the mean
/// log-likelihood changes by less than `tol · max(|ll|, 1)` or `max_iter`
/// steps. With `n_init > 1` the run with the best final likelihood wins.
pub fn fit_gmm(rows: &[&[f32]], k: usize, seed: u64, cfg: &GmmConfig) -> Result<GmmModel> {
    if k == 0 {
        return Err(Error::invalid("mixture needs at least one component"));
    }
    if rows.len() < k {
        return Err(Error::invalid(format!(
            "{} points cannot support {k} components",
            rows.len()
        )));
    }
    let d = rows[0].len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(Error::invalid("rows must share a positive dimension"));
    }
    let data = Data {
        n: rows.len(),
        d,
        values: rows
            .iter()
            .flat_map(|r| r.iter().map(|&v| f64::from(v)))
            .collect(),
    };
    let mut best: Option<GmmModel> = None;
    for init in 0..cfg.n_init.max(1) {
        let model = fit_once(&data, k, seed, init, cfg)?;
        let better = match &best {
            None => true,
            Some(b) => model.log_likelihood_trace.last() > b.log_likelihood_trace.last(),
        };
        if better {
            best = Some(model);
        }
    }
    Ok(best.expect("at least one initialisation ran"))
}

/// Hard labels (argmax responsibility, ties to the lowest index) and per-row
/// log-likelihoods.
pub fn gmm_assign(model: &GmmModel, rows: &[&[f32]]) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut labels = Vec::with_capacity(rows.len());
    let mut lls = Vec::with_capacity(rows.len());
    let mut x = vec![0.0; model.dim];
    for row in rows {
        if row.len() != model.dim {
            return Err(Error::invalid(format!(
                "row of dimension {} for a model of dimension {}",
                row.len(),
                model.dim
            )));
        }
        for (xi, &v) in x.iter_mut().zip(row.iter()) {
            *xi = f64::from(v);
        }
        let lp = model.weighted_log_densities(&x);
        let mut best = 0;
        for (c, v) in lp.iter().enumerate() {
            if *v > lp[best] {
                best = c;
            }
        }
        labels.push(best);
        lls.push(log_sum_exp(&lp));
    }
    Ok((labels, lls))
}
