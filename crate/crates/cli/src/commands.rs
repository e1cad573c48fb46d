use std::io::Write;

use ridgekit::cv::{kfold_cv, loo_grid, loo_min_norm, loo_min_norm_centered, CvGrid};
use ridgekit::experiments::{log_grid, run_bias_variance, run_double_descent, ExperimentConfig, ExperimentGrid};
use ridgekit::io::{fmt_num, DesignOptions, Table, TabularFile};
use ridgekit::kernel::{glm_loglik, gram, kernel_ridge, ridge_glm_primal, GlmSpec, KernelKind};
use ridgekit::lowrank::{soft_impute, FactorError};
use ridgekit::ridge::{ridge_fit, ridge_path};
use ridgekit::{Dataset64, RidgeError};

use crate::{
    BiasVarianceArgs, CompleteArgs, CvArgs, CvMethod, DataArgs, DoubleDescentArgs, FamilyArg, FitArgs, GlmFitArgs,
    KernelFitArgs, LambdaArgs, OutArgs, PathArgs,
};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<RidgeError> for CliError {
    fn from(e: RidgeError) -> Self {
        let code = match e {
            RidgeError::InvalidInput(_) | RidgeError::Domain(_) | RidgeError::Precondition(_) => 2,
            RidgeError::RankDeficient(_)
            | RidgeError::Degenerate(_)
            | RidgeError::Divergence(_)
            | RidgeError::NotConverged { .. } => 1,
        };
        Self { code, message: e.to_string() }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn emit(table: &Table, out: &OutArgs) -> CliResult {
    let text = table.to_csv();
    let io_err = |e: std::io::Error| CliError::usage(format!("cannot write output: {e}"));
    match &out.out {
        Some(path) => std::fs::write(path, text).map_err(io_err),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).map_err(io_err)
        }
    }
}

fn load(data: &DataArgs) -> CliResult<(Dataset64, Vec<String>)> {
    let table = TabularFile::from_path(&data.input)?;
    if data.standardize && data.no_intercept {
        return Err(CliError::usage("--standardize requires an intercept; drop --no-intercept"));
    }
    let opts = DesignOptions { intercept: !data.no_intercept, standardize: data.standardize };
    Ok(table.dataset(&data.target, opts)?)
}

fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::usage(format!("--lambda-grid expects lo:hi:count, got '{spec}'"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, count] = parts.as_slice() else {
        return Err(bad());
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let count: usize = count.trim().parse().map_err(|_| bad())?;
    Ok(log_grid(lo, hi, count)?)
}

/// Penalties from whichever of the three flags was given, or `None`.
fn lambdas(args: &LambdaArgs) -> CliResult<Option<Vec<f64>>> {
    let list = if let Some(l) = args.lambda {
        Some(vec![l])
    } else if let Some(l) = &args.lambdas {
        Some(l.clone())
    } else if let Some(g) = &args.lambda_grid {
        Some(parse_grid(g)?)
    } else {
        None
    };
    if let Some(l) = &list {
        if l.is_empty() {
            return Err(CliError::usage("the penalty grid is empty"));
        }
        if l.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CliError::usage("penalties must be finite and nonnegative"));
        }
    }
    Ok(list)
}

fn require_grid(args: &LambdaArgs) -> CliResult<Vec<f64>> {
    lambdas(args)?.ok_or_else(|| CliError::usage("give --lambda, --lambdas or --lambda-grid"))
}

fn single_lambda(args: &LambdaArgs) -> CliResult<f64> {
    match require_grid(args)?.as_slice() {
        [l] => Ok(*l),
        _ => Err(CliError::usage("this command takes a single --lambda")),
    }
}

fn kv(kind: &str, name: &str, value: f64) -> Vec<String> {
    vec![kind.to_string(), name.to_string(), fmt_num(value)]
}

pub fn fit(args: &FitArgs) -> CliResult {
    let (data, names) = load(&args.data)?;
    let lambda = single_lambda(&args.lambda)?;
    let fit = ridge_fit(&data, lambda)?;
    let rss = (&data.y - &data.x * &fit.coefficients).norm_squared();
    let mut t = Table::new(&["kind", "name", "value"]);
    t.push(kv("lambda", "", lambda));
    if let Some(b0) = fit.intercept {
        t.push(kv("intercept", "", b0));
    }
    // coefficients on the original column scale
    let raw = match &data.column_scales {
        Some(s) => fit.coefficients.component_div(s),
        None => fit.coefficients.clone(),
    };
    for (name, b) in names.iter().zip(raw.iter()) {
        t.push(kv("coefficient", name, *b));
    }
    t.push(kv("rss", "", rss));
    emit(&t, &args.out)
}

pub fn path(args: &PathArgs) -> CliResult {
    let (data, names) = load(&args.data)?;
    let grid = require_grid(&args.lambda)?;
    let path = ridge_path(&data, &grid)?;
    let mut header = vec!["lambda".to_string(), "intercept".to_string()];
    header.extend(names.iter().cloned());
    header.push("coef_norm".to_string());
    header.push("rss".to_string());
    let mut t = Table::new(&header);
    for (i, &lambda) in path.lambdas.iter().enumerate() {
        let b = path.row(i);
        let raw = match &data.column_scales {
            Some(s) => b.component_div(s),
            None => b.clone(),
        };
        let mut row = vec![fmt_num(lambda), data.intercept_for(&b).map_or("NA".to_string(), fmt_num)];
        row.extend(raw.iter().map(|v| fmt_num(*v)));
        row.push(fmt_num(b.norm()));
        row.push(fmt_num((&data.y - &data.x * &b).norm_squared()));
        t.push(row);
    }
    emit(&t, &args.out)
}

fn grid_table(grid: &CvGrid<f64>) -> Table {
    let mut t = Table::new(&["lambda", "score", "selected"]);
    for (i, (l, s)) in grid.lambdas.iter().zip(&grid.scores).enumerate() {
        t.push(vec![fmt_num(*l), fmt_num(*s), u8::from(i == grid.selected).to_string()]);
    }
    t
}

pub fn cv(args: &CvArgs) -> CliResult {
    let (data, _) = load(&args.data)?;
    let table = match args.method {
        CvMethod::Loo => grid_table(&loo_grid(&data, &require_grid(&args.lambda)?)?),
        CvMethod::Kfold => {
            if args.folds < 2 || args.folds > data.n() {
                return Err(CliError::usage(format!("--folds must lie in 2..={}", data.n())));
            }
            grid_table(&kfold_cv(&data, &require_grid(&args.lambda)?, args.folds, args.seed)?)
        }
        CvMethod::LooMinNorm => {
            if data.p() <= data.n() {
                return Err(CliError::usage(format!(
                    "loo-min-norm needs more features than rows (p = {}, n = {})",
                    data.p(),
                    data.n()
                )));
            }
            if lambdas(&args.lambda)?.is_some_and(|l| l != [0.0]) {
                return Err(CliError::usage("loo-min-norm takes no penalty"));
            }
            let r = if data.has_intercept() { loo_min_norm_centered(&data)? } else { loo_min_norm(&data)? };
            let mut t = Table::new(&["lambda", "score", "selected"]);
            t.push(vec![fmt_num(0.0), fmt_num(r.mean()), "1".to_string()]);
            t
        }
    };
    emit(&table, &args.out)
}

fn parse_kernel(spec: &str) -> CliResult<KernelKind<f64>> {
    let bad = || CliError::usage(format!("--kernel expects linear, rbf:GAMMA or poly:DEGREE:OFFSET, got '{spec}'"));
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["linear"] => Ok(KernelKind::Linear),
        ["rbf", g] => Ok(KernelKind::Rbf { gamma: g.parse().map_err(|_| bad())? }),
        ["poly", d, o] => {
            Ok(KernelKind::Polynomial { degree: d.parse().map_err(|_| bad())?, offset: o.parse().map_err(|_| bad())? })
        }
        _ => Err(bad()),
    }
}

pub fn kernel_fit(args: &KernelFitArgs) -> CliResult {
    let (data, _) = load(&args.data)?;
    let kind = parse_kernel(&args.kernel)?;
    let lambda = single_lambda(&args.lambda)?;
    let k = gram(&data, kind)?;
    let mut fit = kernel_ridge(&k, &data.y, lambda)?;
    fit.intercept = data.y_mean;
    let fitted = fit.fitted(&k);
    let mut t = Table::new(&["row", "alpha", "fitted"]);
    for i in 0..data.n() {
        t.push(vec![(i + 1).to_string(), fmt_num(fit.alpha[i]), fmt_num(fitted[i])]);
    }
    emit(&t, &args.out)
}

pub fn glm_fit(args: &GlmFitArgs) -> CliResult {
    let (data, names) = load(&args.data)?;
    let lambda = single_lambda(&args.lambda)?;
    let spec = match args.family {
        FamilyArg::Gaussian => GlmSpec::gaussian(),
        FamilyArg::Binomial => GlmSpec::binomial(),
    };
    let spec = if args.data.no_intercept { spec.without_intercept() } else { spec };
    let fit = ridge_glm_primal(&data, spec, lambda)?;
    let raw = match &data.column_scales {
        Some(s) => fit.coefficients.component_div(s),
        None => fit.coefficients.clone(),
    };
    let eta = (data.raw_x() * &raw).add_scalar(fit.intercept.unwrap_or(0.0));
    let mut t = Table::new(&["kind", "name", "value"]);
    t.push(kv("lambda", "", lambda));
    if let Some(b0) = fit.intercept {
        t.push(kv("intercept", "", b0));
    }
    for (name, b) in names.iter().zip(raw.iter()) {
        t.push(kv("coefficient", name, *b));
    }
    t.push(kv("loglik", "", glm_loglik(spec.family, &data.raw_y(), &eta)));
    emit(&t, &args.out)
}

pub fn complete(args: &CompleteArgs) -> CliResult {
    let table = TabularFile::from_path(&args.input)?;
    let masked = table.masked()?;
    let lambda = single_lambda(&args.lambda)?;
    let pair = match soft_impute(&masked, lambda, args.rank, args.tol, args.max_iter, args.seed) {
        Ok(p) => p,
        Err(FactorError::Ridge(e)) => return Err(e.into()),
        Err(e @ FactorError::NotConverged { .. }) => return Err(CliError { code: 1, message: e.to_string() }),
    };
    let fitted = pair.product();
    let (m, n) = masked.shape();
    let out = if args.long {
        let mut t = Table::new(&["row", "column", "observed", "value", "fitted"]);
        for i in 0..m {
            for j in 0..n {
                let obs = masked.is_observed(i, j);
                let value = if obs { fmt_num(masked.values()[(i, j)]) } else { "NA".to_string() };
                t.push(vec![
                    (i + 1).to_string(),
                    table.header[j].clone(),
                    u8::from(obs).to_string(),
                    value,
                    fmt_num(fitted[(i, j)]),
                ]);
            }
        }
        t
    } else {
        let mut t = Table::new(&table.header);
        for i in 0..m {
            t.push((0..n).map(|j| fmt_num(fitted[(i, j)])).collect());
        }
        t
    };
    emit(&out, &args.out)
}

pub fn bias_variance(args: &BiasVarianceArgs) -> CliResult {
    let mut cfg = ExperimentConfig::bias_variance(args.seed);
    cfg.n = args.n;
    cfg.p = args.p;
    cfg.snr = args.snr;
    if let Some(l) = lambdas(&args.lambda)? {
        cfg.grid = ExperimentGrid::Lambdas(l);
    }
    emit(&run_bias_variance(&cfg)?.to_table(), &args.out)
}

pub fn double_descent(args: &DoubleDescentArgs) -> CliResult {
    if args.max_d == 0 {
        return Err(CliError::usage("--max-d must be at least 1"));
    }
    let mut cfg = ExperimentConfig::double_descent(args.seed);
    cfg.n = args.n;
    cfg.snr = args.snr;
    cfg.test_size = args.test_size;
    cfg.grid = ExperimentGrid::Dimensions((1..=args.max_d).collect());
    emit(&run_double_descent(&cfg)?.to_table(), &args.out)
}
