use super::localization::tapered_gain_linear;
use super::{
    enkf_gain_ls, enkf_gain_model, enkf_gain_sample, enkf_measurement_update, inflate, sqrt_enkf_update, Anomalies,
    Ensemble, GainEstimate, InflationFactor, TaperSpec, TaperVariant,
};
use crate::error::{Error, Result};
use crate::math::{Matrix, RngStream, Vector};
use crate::models::{Measurement, Transition};

/// How the output ensemble is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputMode {
    /// `Y = h(X, E)` with fresh noise draws.
    Sampled,
    /// Noise-free anomalies `Z~ = H X~` (or centered `h(X, 0)` for
    /// additive noise).
    ModelKnowledge,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OutputEnsemble {
    Sampled(Matrix),
    NoiseFree(Anomalies),
}

impl OutputEnsemble {
    pub fn anomalies(&self) -> Anomalies {
        match self {
            OutputEnsemble::Sampled(y) => Anomalies::center(y),
            OutputEnsemble::NoiseFree(z) => z.clone(),
        }
    }
}

/// Predicted output ensemble for `x`.
pub fn output_ensemble<M>(x: &Ensemble, meas: &M, rng: &mut RngStream, mode: OutputMode) -> Result<OutputEnsemble>
where
    M: Measurement + ?Sized,
{
    match mode {
        OutputMode::Sampled => {
            let e = meas.measurement_noise().sample(rng, x.size());
            Ok(OutputEnsemble::Sampled(meas.observe_ensemble(x.members(), &e)))
        }
        OutputMode::ModelKnowledge => {
            if let Some(h) = meas.linear_map() {
                Ok(OutputEnsemble::NoiseFree(x.anomalies().map(h)))
            } else if meas.additive_noise() {
                let zeros = Matrix::zeros(meas.meas_dim(), x.size());
                Ok(OutputEnsemble::NoiseFree(Anomalies::center(&meas.observe_ensemble(x.members(), &zeros))))
            } else {
                Err(Error::InvalidParameter(
                    "model-knowledge outputs need a linear map or additive measurement noise".into(),
                ))
            }
        }
    }
}

/// Propagates every member with its own process noise draw, from step `k`
/// to `k + 1`.
pub fn enkf_time_update<M>(x: &Ensemble, model: &M, rng: &mut RngStream, k: usize) -> Result<Ensemble>
where
    M: Transition + ?Sized,
{
    let v = model.process_noise().sample(rng, x.size());
    Ensemble::new(model.propagate_ensemble(x.members(), &v, k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GainMode {
    /// Model knowledge when the measurement noise is additive, sampled
    /// otherwise.
    #[default]
    Auto,
    Sampled,
    ModelKnowledge,
    LeastSquares,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateScheme {
    #[default]
    PerturbedObservations,
    SquareRoot,
}

/// Processing order of scalar measurement components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeasurementOrder {
    #[default]
    Natural,
    Reverse,
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Localization {
    pub taper: TaperSpec,
    pub variant: TaperVariant,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnkfOptions {
    pub gain: GainMode,
    pub localization: Option<Localization>,
    pub inflation: InflationFactor,
    /// One scalar update per measurement component; needs a linear map and
    /// diagonal `R`.
    pub sequential: bool,
    pub order: MeasurementOrder,
    pub scheme: UpdateScheme,
}

fn resolve_gain<M: Measurement + ?Sized>(mode: GainMode, meas: &M) -> GainMode {
    match mode {
        GainMode::Auto if meas.additive_noise() => GainMode::ModelKnowledge,
        GainMode::Auto => GainMode::Sampled,
        other => other,
    }
}

struct UpdateInputs<'a> {
    x: &'a Anomalies,
    sampled: Option<&'a Anomalies>,
    noise_free: Option<&'a Anomalies>,
    h: Option<&'a Matrix>,
    r: &'a Matrix,
    rho_m: Option<&'a Matrix>,
}

fn gain_for(mode: GainMode, localization: Option<&Localization>, inp: &UpdateInputs) -> Result<GainEstimate> {
    if let Some(loc) = localization {
        let h = inp
            .h
            .ok_or_else(|| Error::InvalidParameter("tapering needs a linear measurement map".into()))?;
        return Ok(tapered_gain_linear(inp.x, &loc.taper, loc.variant, h, inp.r, inp.rho_m)?.estimate);
    }
    let need = |a: Option<&Anomalies>| a.expect("output ensemble prepared for the gain mode").clone();
    match mode {
        GainMode::Sampled => enkf_gain_sample(inp.x, &need(inp.sampled)),
        GainMode::LeastSquares => enkf_gain_ls(inp.x, &need(inp.sampled)),
        GainMode::ModelKnowledge | GainMode::Auto => enkf_gain_model(inp.x, &need(inp.noise_free), inp.r),
    }
}

fn check_options(opts: &EnkfOptions) -> Result<()> {
    if opts.scheme == UpdateScheme::SquareRoot && opts.localization.is_some() {
        return Err(Error::InvalidParameter("the square-root update does not support tapering".into()));
    }
    Ok(())
}

/// Measurement update of a prediction ensemble: inflation first, then one
/// batch update or a sequence of scalar updates.
pub fn enkf_analysis<M>(x_pred: &Ensemble, y: &Vector, meas: &M, opts: &EnkfOptions, rng: &mut RngStream) -> Result<Ensemble>
where
    M: Measurement + ?Sized,
{
    check_options(opts)?;
    if y.len() != meas.meas_dim() {
        return Err(Error::dims("measurement", meas.meas_dim(), y.len()));
    }
    let x = inflate(x_pred, opts.inflation);
    if opts.sequential {
        sequential_analysis(x, y, meas, opts, rng)
    } else {
        batch_analysis(&x, y, meas, opts, rng)
    }
}

fn batch_analysis<M>(x: &Ensemble, y: &Vector, meas: &M, opts: &EnkfOptions, rng: &mut RngStream) -> Result<Ensemble>
where
    M: Measurement + ?Sized,
{
    let mode = resolve_gain(opts.gain, meas);
    let tapered = opts.localization.is_some();
    let square_root = opts.scheme == UpdateScheme::SquareRoot;
    let need_sampled = !square_root || (!tapered && matches!(mode, GainMode::Sampled | GainMode::LeastSquares));
    let need_noise_free = square_root || (!tapered && mode == GainMode::ModelKnowledge);

    let sampled = if need_sampled {
        Some(output_ensemble(x, meas, rng, OutputMode::Sampled)?)
    } else {
        None
    };
    let noise_free = if need_noise_free {
        Some(output_ensemble(x, meas, rng, OutputMode::ModelKnowledge)?.anomalies())
    } else {
        None
    };
    let x_tilde = x.anomalies();
    let sampled_tilde = sampled.as_ref().map(OutputEnsemble::anomalies);
    let inputs = UpdateInputs {
        x: &x_tilde,
        sampled: sampled_tilde.as_ref(),
        noise_free: noise_free.as_ref(),
        h: meas.linear_map(),
        r: meas.noise_cov(),
        rho_m: None,
    };
    let gain = gain_for(mode, opts.localization.as_ref(), &inputs)?;

    if !square_root {
        return enkf_measurement_update(x, sampled.as_ref().expect("sampled outputs"), &gain, y);
    }
    let mean = x.mean();
    let y_hat = match meas.linear_map() {
        Some(h) => h * &mean,
        None => meas
            .observe_ensemble(x.members(), &Matrix::zeros(meas.meas_dim(), x.size()))
            .column_mean(),
    };
    let z = noise_free.expect("noise-free outputs");
    let anomalies = sqrt_enkf_update(&x_tilde, &z, meas.noise_cov())?;
    Ensemble::from_parts(&(mean + &gain.gain * (y - y_hat)), &anomalies)
}

fn sequential_analysis<M>(x: Ensemble, y: &Vector, meas: &M, opts: &EnkfOptions, rng: &mut RngStream) -> Result<Ensemble>
where
    M: Measurement + ?Sized,
{
    let h = meas
        .linear_map()
        .ok_or_else(|| Error::InvalidParameter("sequential updates need a linear measurement map".into()))?;
    let r = meas.noise_cov();
    let m = y.len();
    for i in 0..m {
        for j in 0..m {
            if i != j && r[(i, j)].abs() > 1e-12 {
                return Err(Error::NonDiagonalR { row: i, col: j, value: r[(i, j)] });
            }
        }
    }
    let order: Vec<usize> = match opts.order {
        MeasurementOrder::Natural => (0..m).collect(),
        MeasurementOrder::Reverse => (0..m).rev().collect(),
        MeasurementOrder::Random => rng.permutation(m),
    };
    let mode = resolve_gain(opts.gain, meas);
    let square_root = opts.scheme == UpdateScheme::SquareRoot;
    let n_members = x.size();
    let noise = if square_root {
        None
    } else {
        Some(meas.measurement_noise().sample(rng, n_members))
    };
    let rho_m = match &opts.localization {
        Some(loc) if loc.variant == TaperVariant::CrossCovariance => Some(loc.taper.measurement_taper(h)),
        _ => None,
    };

    let mut members = x.into_members();
    for &i in &order {
        let h_i = h.rows(i, 1).into_owned();
        let r_i = Matrix::from_element(1, 1, r[(i, i)]);
        let x_tilde = Anomalies::center(&members);
        let z_tilde = x_tilde.map(&h_i);
        let y_i = noise.as_ref().map(|e| &h_i * &members + e.rows(i, 1));
        let y_tilde = y_i.as_ref().map(Anomalies::center);
        let rho_col = rho_m.as_ref().map(|t| t.columns(i, 1).into_owned());
        let inputs = UpdateInputs {
            x: &x_tilde,
            sampled: y_tilde.as_ref(),
            noise_free: Some(&z_tilde),
            h: Some(&h_i),
            r: &r_i,
            rho_m: rho_col.as_ref(),
        };
        let gain = gain_for(mode, opts.localization.as_ref(), &inputs)?;
        members = match &y_i {
            Some(y_ens) => {
                let innovations = y_ens.map(|v| y[i] - v);
                &members + &gain.gain * innovations
            }
            None => {
                let mean = members.column_mean();
                let shifted = &mean + &gain.gain * (y[i] - (&h_i * &mean)[0]);
                let anomalies = sqrt_enkf_update(&x_tilde, &z_tilde, &r_i)?;
                Ensemble::from_parts(&shifted, &anomalies)?.into_members()
            }
        };
    }
    Ensemble::new(members)
}

/// Time update from step `k` followed by the analysis with `y_{k+1}`.
pub fn enkf_step<M>(x: &Ensemble, y: &Vector, model: &M, opts: &EnkfOptions, rng: &mut RngStream, k: usize) -> Result<Ensemble>
where
    M: Transition + Measurement + ?Sized,
{
    let pred = enkf_time_update(x, model, rng, k)?;
    enkf_analysis(&pred, y, model, opts, rng)
}
