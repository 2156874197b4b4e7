//! The five linear fitters behind [`super::fit`].
//!
//! All methods solve variants of penalized least squares on the
//! standardized expansion, with an unpenalized intercept handled by
//! centering. Ridge-family systems switch to the dual (kernel) form when
//! the column count exceeds the row count, so degree-3 full expansions stay
//! tractable.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::{Design, Diagnostics, RegressError};

/// Hyperparameters for every method, with the documented defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Ridge penalty strength.
    pub ridge_alpha: f64,
    /// Cross-validation grid for ridge-cv.
    pub cv_alphas: Vec<f64>,
    pub cv_folds: usize,
    pub bayes_max_iter: usize,
    /// Relative tolerance on the precision updates.
    pub bayes_tol: f64,
    pub sgd_epochs: usize,
    pub sgd_eta0: f64,
    /// Inverse-scaling exponent: step = eta0 / t^power.
    pub sgd_power: f64,
    pub sgd_alpha: f64,
    /// Huber transition parameter, in robust scale units.
    pub huber_delta: f64,
    pub huber_alpha: f64,
    pub huber_max_iter: usize,
    pub huber_tol: f64,
    /// Required by sgd; other methods are deterministic without it.
    pub seed: Option<u64>,
}

impl Default for FitOptions {
    fn default() -> FitOptions {
        // 13 log-spaced points over 1e-3..=1e3.
        let cv_alphas = (0..13).map(|i| 10f64.powf(-3.0 + 0.5 * i as f64)).collect();
        FitOptions {
            ridge_alpha: 1.0,
            cv_alphas,
            cv_folds: 5,
            bayes_max_iter: 300,
            bayes_tol: 1e-4,
            sgd_epochs: 1000,
            sgd_eta0: 0.01,
            sgd_power: 0.25,
            sgd_alpha: 1e-4,
            huber_delta: 1.35,
            huber_alpha: 1e-4,
            huber_max_iter: 100,
            huber_tol: 1e-8,
            seed: None,
        }
    }
}

impl FitOptions {
    pub fn with_seed(seed: u64) -> FitOptions {
        FitOptions {
            seed: Some(seed),
            ..FitOptions::default()
        }
    }
}

/// Non-constant design columns as an owned matrix, plus targets.
fn split_design(design: &Design, y: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let n = design.rows();
    let p = design.dim() - 1;
    let x = DMatrix::from_fn(n, p, |i, j| design.expanded[(i, j + 1)]);
    (x, DVector::from_column_slice(y))
}

/// Penalized least-squares workspace with an unpenalized intercept.
///
/// Minimizes `sum_i w_i (y_i - b0 - x_i beta)^2 + alpha ||beta||^2`.
/// Centering by the weighted means eliminates the intercept; the primal or
/// the dual normal equations are then solved by Cholesky depending on
/// whether columns or rows are fewer. In the dual branch the uncentered
/// Gram matrix `X X^T` is precomputed once so reweighted solves (Huber) and
/// repeated penalties (cross-validation) stay cheap.
struct RidgeWorkspace {
    x: DMatrix<f64>,
    y: DVector<f64>,
    dual: bool,
    gram0: Option<DMatrix<f64>>,
}

impl RidgeWorkspace {
    fn new(x: DMatrix<f64>, y: DVector<f64>) -> RidgeWorkspace {
        let dual = x.ncols() > x.nrows();
        let gram0 = dual.then(|| &x * x.transpose());
        RidgeWorkspace { x, y, dual, gram0 }
    }

    fn solve(
        &self,
        weights: Option<&DVector<f64>>,
        alpha: f64,
    ) -> Result<(f64, DVector<f64>), RegressError> {
        let n = self.x.nrows();
        let p = self.x.ncols();
        let ones = DVector::from_element(n, 1.0);
        let w = weights.unwrap_or(&ones);
        let ws: f64 = w.sum();
        if ws <= 0.0 || !ws.is_finite() {
            return Err(RegressError::NonFinite);
        }
        // weighted means
        let mut means = DVector::zeros(p);
        for j in 0..p {
            let mut acc = 0.0;
            for i in 0..n {
                acc += w[i] * self.x[(i, j)];
            }
            means[j] = acc / ws;
        }
        let y_mean = self.y.dot(w) / ws;

        let beta = if !self.dual {
            // primal: (B^T B + alpha I) beta = B^T b, B = sqrt(w)(X - mu)
            let mut b_mat = DMatrix::zeros(n, p);
            let mut b_vec = DVector::zeros(n);
            for i in 0..n {
                let sw = w[i].sqrt();
                for j in 0..p {
                    b_mat[(i, j)] = sw * (self.x[(i, j)] - means[j]);
                }
                b_vec[i] = sw * (self.y[i] - y_mean);
            }
            let mut gram = b_mat.transpose() * &b_mat;
            for j in 0..p {
                gram[(j, j)] += alpha;
            }
            let rhs = b_mat.transpose() * b_vec;
            let chol = gram.cholesky().ok_or(RegressError::Singular)?;
            chol.solve(&rhs)
        } else {
            // dual: beta = A^T (A A^T + alpha I)^{-1} b, built from the
            // cached uncentered Gram.
            let gram0 = self.gram0.as_ref().expect("dual workspace has gram0");
            let u = &self.x * &means; // X mu
            let s = means.dot(&means);
            let mut k = DMatrix::zeros(n, n);
            for i in 0..n {
                let swi = w[i].sqrt();
                for j in 0..n {
                    let centered = gram0[(i, j)] - u[i] - u[j] + s;
                    k[(i, j)] = swi * w[j].sqrt() * centered;
                }
                k[(i, i)] += alpha;
            }
            let mut b_vec = DVector::zeros(n);
            for i in 0..n {
                b_vec[i] = w[i].sqrt() * (self.y[i] - y_mean);
            }
            let chol = k.cholesky().ok_or(RegressError::Singular)?;
            let gamma = chol.solve(&b_vec);
            // beta = (X - 1 mu^T)^T (sqrt(w) . gamma)
            let mut sg = DVector::zeros(n);
            for i in 0..n {
                sg[i] = w[i].sqrt() * gamma[i];
            }
            let mut beta = self.x.transpose() * &sg;
            let total: f64 = sg.sum();
            for j in 0..p {
                beta[j] -= means[j] * total;
            }
            beta
        };
        let intercept = y_mean - means.dot(&beta);
        if !intercept.is_finite() || beta.iter().any(|v| !v.is_finite()) {
            return Err(RegressError::NonFinite);
        }
        Ok((intercept, beta))
    }
}

fn assemble(intercept: f64, beta: &DVector<f64>) -> Vec<f64> {
    let mut coefficients = Vec::with_capacity(beta.len() + 1);
    coefficients.push(intercept);
    coefficients.extend(beta.iter().copied());
    coefficients
}

fn intercept_only(y: &[f64]) -> (Vec<f64>, Diagnostics) {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    (
        vec![mean],
        Diagnostics {
            iterations: 0,
            converged: true,
            chosen_alpha: None,
        },
    )
}

pub(super) fn fit_ridge(
    design: &Design,
    y: &[f64],
    options: &FitOptions,
) -> Result<(Vec<f64>, Diagnostics), RegressError> {
    if design.dim() == 1 {
        return Ok(intercept_only(y));
    }
    let (x, y_vec) = split_design(design, y);
    let workspace = RidgeWorkspace::new(x, y_vec);
    let (intercept, beta) = workspace.solve(None, options.ridge_alpha)?;
    Ok((
        assemble(intercept, &beta),
        Diagnostics {
            iterations: 1,
            converged: true,
            chosen_alpha: Some(options.ridge_alpha),
        },
    ))
}

pub(super) fn fit_ridge_cv(
    design: &Design,
    y: &[f64],
    options: &FitOptions,
) -> Result<(Vec<f64>, Diagnostics), RegressError> {
    if design.dim() == 1 {
        return Ok(intercept_only(y));
    }
    if options.cv_alphas.is_empty() {
        return Err(RegressError::MalformedModel(
            "ridge-cv alpha grid is empty".to_string(),
        ));
    }
    let n = design.rows();
    let folds = options.cv_folds.clamp(2, n);
    let (x, y_vec) = split_design(design, y);
    let p = x.ncols();

    // Contiguous folds: deterministic, no shuffling. Rows arrive in sorted
    // user order, which is as good as arbitrary for this purpose.
    let mut boundaries = Vec::with_capacity(folds + 1);
    for k in 0..=folds {
        boundaries.push(k * n / folds);
    }

    let mut sse = vec![0.0; options.cv_alphas.len()];
    for k in 0..folds {
        let (lo, hi) = (boundaries[k], boundaries[k + 1]);
        if lo == hi {
            continue;
        }
        let train_rows: Vec<usize> = (0..n).filter(|i| *i < lo || *i >= hi).collect();
        let x_train = DMatrix::from_fn(train_rows.len(), p, |i, j| x[(train_rows[i], j)]);
        let y_train = DVector::from_fn(train_rows.len(), |i, _| y_vec[train_rows[i]]);
        let workspace = RidgeWorkspace::new(x_train, y_train);
        for (a, &alpha) in options.cv_alphas.iter().enumerate() {
            let (intercept, beta) = workspace.solve(None, alpha)?;
            for i in lo..hi {
                let mut pred = intercept;
                for j in 0..p {
                    pred += x[(i, j)] * beta[j];
                }
                let err = pred - y_vec[i];
                sse[a] += err * err;
            }
        }
    }
    let best = sse
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let alpha = options.cv_alphas[best];

    let workspace = RidgeWorkspace::new(x, y_vec);
    let (intercept, beta) = workspace.solve(None, alpha)?;
    Ok((
        assemble(intercept, &beta),
        Diagnostics {
            iterations: folds * options.cv_alphas.len(),
            converged: true,
            chosen_alpha: Some(alpha),
        },
    ))
}

/// Evidence-maximizing Bayesian ridge. One symmetric eigendecomposition of
/// the centered Gram makes every precision update O(n + p).
pub(super) fn fit_bayesian_ridge(
    design: &Design,
    y: &[f64],
    options: &FitOptions,
) -> Result<(Vec<f64>, Diagnostics), RegressError> {
    if design.dim() == 1 {
        return Ok(intercept_only(y));
    }
    const PRIOR: f64 = 1e-6;
    let (x, y_vec) = split_design(design, y);
    let n = x.nrows();
    let p = x.ncols();

    let means = x.row_mean().transpose();
    let y_mean = y_vec.mean();
    let mut xc = x.clone();
    for i in 0..n {
        for j in 0..p {
            xc[(i, j)] -= means[j];
        }
    }
    let yc = y_vec.map(|v| v - y_mean);
    let yc_norm2 = yc.dot(&yc);

    let dual = p > n;
    // Rotated coordinates: primal uses S = Xc^T Xc = V s V^T with
    // b = V^T Xc^T yc; dual uses K = Xc Xc^T = U s U^T with c = U^T yc.
    let (eigvals, eigvecs, rot) = if dual {
        let k = &xc * xc.transpose();
        let eig = k.symmetric_eigen();
        let c = eig.eigenvectors.transpose() * &yc;
        (eig.eigenvalues, eig.eigenvectors, c)
    } else {
        let s = xc.transpose() * &xc;
        let eig = s.symmetric_eigen();
        let b = eig.eigenvectors.transpose() * (xc.transpose() * &yc);
        (eig.eigenvalues, eig.eigenvectors, b)
    };
    let s: Vec<f64> = eigvals.iter().map(|&v| v.max(0.0)).collect();

    let var_y = yc_norm2 / n as f64;
    let mut noise_prec = if var_y > 0.0 { 1.0 / var_y } else { 1.0 };
    let mut weight_prec = 1.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.bayes_max_iter {
        iterations += 1;
        let mut gamma = 0.0;
        let mut m_norm2 = 0.0;
        let mut rss = 0.0;
        if dual {
            for (i, &si) in s.iter().enumerate() {
                let denom = weight_prec + noise_prec * si;
                gamma += noise_prec * si / denom;
                let ci = rot[i];
                m_norm2 += noise_prec * noise_prec * si * ci * ci / (denom * denom);
                let resid = weight_prec * ci / denom;
                rss += resid * resid;
            }
        } else {
            let mut fit_norm2 = 0.0;
            let mut cross = 0.0;
            for (i, &si) in s.iter().enumerate() {
                let denom = weight_prec + noise_prec * si;
                gamma += noise_prec * si / denom;
                let bi = rot[i];
                let mi = noise_prec * bi / denom;
                m_norm2 += mi * mi;
                cross += mi * bi;
                fit_norm2 += si * mi * mi;
            }
            rss = (yc_norm2 - 2.0 * cross + fit_norm2).max(0.0);
        }
        let new_weight_prec = (gamma + 2.0 * PRIOR) / (m_norm2 + 2.0 * PRIOR);
        let new_noise_prec = (n as f64 - gamma + 2.0 * PRIOR) / (rss + 2.0 * PRIOR);
        let dw = (new_weight_prec - weight_prec).abs() / weight_prec.max(1e-300);
        let dn = (new_noise_prec - noise_prec).abs() / noise_prec.max(1e-300);
        weight_prec = new_weight_prec;
        noise_prec = new_noise_prec;
        if dw < options.bayes_tol && dn < options.bayes_tol {
            converged = true;
            break;
        }
    }

    // posterior mean in original coordinates
    let beta: DVector<f64> = if dual {
        let mut v = DVector::zeros(n);
        for (i, &si) in s.iter().enumerate() {
            let denom = weight_prec + noise_prec * si;
            v[i] = noise_prec * rot[i] / denom;
        }
        xc.transpose() * (&eigvecs * v)
    } else {
        let mut m_rot = DVector::zeros(p);
        for (i, &si) in s.iter().enumerate() {
            let denom = weight_prec + noise_prec * si;
            m_rot[i] = noise_prec * rot[i] / denom;
        }
        &eigvecs * m_rot
    };
    let intercept = y_mean - means.dot(&beta);
    if !intercept.is_finite() || beta.iter().any(|v| !v.is_finite()) {
        return Err(RegressError::NonFinite);
    }
    Ok((
        assemble(intercept, &beta),
        Diagnostics {
            iterations,
            converged,
            chosen_alpha: Some(weight_prec / noise_prec),
        },
    ))
}

/// Plain SGD on squared loss with an L2 penalty and inverse-scaling step
/// size. The shuffle order comes from the mandatory seed, so runs are
/// reproducible.
pub(super) fn fit_sgd(
    design: &Design,
    y: &[f64],
    options: &FitOptions,
) -> Result<(Vec<f64>, Diagnostics), RegressError> {
    if design.dim() == 1 {
        return Ok(intercept_only(y));
    }
    let seed = options.seed.ok_or(RegressError::MissingSeed)?;
    let (x, y_vec) = split_design(design, y);
    let n = x.nrows();
    let p = x.ncols();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut beta: DVector<f64> = DVector::zeros(p);
    let mut intercept = 0.0f64;
    let mut t = 1.0f64;
    for _ in 0..options.sgd_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let eta = options.sgd_eta0 / t.powf(options.sgd_power);
            let mut pred = intercept;
            for j in 0..p {
                pred += x[(i, j)] * beta[j];
            }
            let err = pred - y_vec[i];
            for j in 0..p {
                beta[j] -= eta * (err * x[(i, j)] + options.sgd_alpha * beta[j]);
            }
            intercept -= eta * err;
            t += 1.0;
        }
        if !intercept.is_finite() || beta.iter().any(|v| !v.is_finite()) {
            return Err(RegressError::NonFinite);
        }
    }
    Ok((
        assemble(intercept, &beta),
        Diagnostics {
            iterations: options.sgd_epochs,
            converged: true,
            chosen_alpha: Some(options.sgd_alpha),
        },
    ))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Iteratively reweighted least squares for the Huber loss. Residual scale
/// is re-estimated each round from the MAD; weights fall off as
/// `delta * scale / |r|` past the transition.
pub(super) fn fit_huber(
    design: &Design,
    y: &[f64],
    options: &FitOptions,
) -> Result<(Vec<f64>, Diagnostics), RegressError> {
    if design.dim() == 1 {
        return Ok(intercept_only(y));
    }
    let (x, y_vec) = split_design(design, y);
    let n = x.nrows();
    let p = x.ncols();
    let workspace = RidgeWorkspace::new(x, y_vec);
    let (mut intercept, mut beta) = workspace.solve(None, options.huber_alpha)?;

    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.huber_max_iter {
        iterations += 1;
        let mut residuals = Vec::with_capacity(n);
        for i in 0..n {
            let mut pred = intercept;
            for j in 0..p {
                pred += workspace.x[(i, j)] * beta[j];
            }
            residuals.push(workspace.y[i] - pred);
        }
        let med = median(&mut residuals.clone());
        let mut abs_dev: Vec<f64> = residuals.iter().map(|r| (r - med).abs()).collect();
        let scale = 1.4826 * median(&mut abs_dev);
        if scale < 1e-12 {
            converged = true;
            break;
        }
        let threshold = options.huber_delta * scale;
        let weights = DVector::from_fn(n, |i, _| {
            let r = residuals[i].abs();
            if r <= threshold {
                1.0
            } else {
                threshold / r
            }
        });
        let (new_intercept, new_beta) = workspace.solve(Some(&weights), options.huber_alpha)?;
        let mut change = (new_intercept - intercept).abs();
        for j in 0..p {
            change = change.max((new_beta[j] - beta[j]).abs());
        }
        intercept = new_intercept;
        beta = new_beta;
        if change < options.huber_tol {
            converged = true;
            break;
        }
    }
    Ok((
        assemble(intercept, &beta),
        Diagnostics {
            iterations,
            converged,
            chosen_alpha: Some(options.huber_alpha),
        },
    ))
}
