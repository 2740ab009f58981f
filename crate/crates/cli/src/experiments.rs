use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use oppenheim_core::counting::{asymptotic_table, count_n, count_n_tilde};
use oppenheim_core::diophantine::{
    classify_form, estimate_kappa, ewas_search, geometric_grid, ClassifyConfig, DenominatorMode, EwasConfig,
};
use oppenheim_core::io::{parse_tagged, Entry, FormSpec, LoadedForm};
use oppenheim_core::latgeo::{
    form_frame, orbit_alpha_moment, shrink_profile, siegel_average, FullLattice, KGrid, OrbitGroup, TestFunction,
    ALPHA_NODE_CAP,
};
use oppenheim_core::regions::StarRegion;
use oppenheim_core::scalar::{dyadic, Real, Scalar};
use oppenheim_core::spectra::{berry_tabor_table, eigenvalues, pair_correlation, Torus};
use oppenheim_core::subspaces::{
    enumerate_null_first_type, enumerate_null_second_type, enumerate_quasinull, exceptional_subspaces,
    invariant_split, null_criterion, null_subspaces, null_vectors_21, quasinull_test, RationalSubspace,
};
use oppenheim_core::volume::lambda_fit;
use oppenheim_core::Error;

use crate::config::{Experiment, ResolvedConfig};
use crate::output::{ints, num, num17, opt, Artifact};
use crate::CliError;

macro_rules! with_form {
    ($loaded:expr, $f:ident => $body:expr) => {
        match $loaded {
            LoadedForm::Rational($f) => $body,
            LoadedForm::Float($f) => $body,
            LoadedForm::Tagged($f) => $body,
        }
    };
}

fn text(s: &str) -> Entry {
    Entry::Text(s.to_owned())
}

fn form_spec(entries: Vec<Vec<&str>>, shift: Vec<&str>, mode: oppenheim_core::io::FormMode) -> FormSpec {
    FormSpec {
        dim: entries.len(),
        entries: entries.into_iter().map(|r| r.into_iter().map(text).collect()).collect(),
        shift: Some(shift.into_iter().map(text).collect()),
        mode,
    }
}

fn tagged() -> oppenheim_core::io::FormMode {
    oppenheim_core::io::FormMode::Tagged
}

/// `x₁² + x₂² + x₃² − √2 x₄²` with `ξ = (3/10, 0, 0, 0)`.
pub fn irrational_31() -> FormSpec {
    form_spec(
        vec![
            vec!["1", "0", "0", "0"],
            vec!["0", "1", "0", "0"],
            vec!["0", "0", "1", "0"],
            vec!["0", "0", "0", "-sqrt(2)"],
        ],
        vec!["3/10", "0", "0", "0"],
        tagged(),
    )
}

/// `x₁x₄ − x₂x₃` with the given shift.
pub fn split_22(shift: Vec<&str>) -> FormSpec {
    form_spec(
        vec![
            vec!["0", "0", "0", "1/2"],
            vec!["0", "0", "-1/2", "0"],
            vec!["0", "-1/2", "0", "0"],
            vec!["1/2", "0", "0", "0"],
        ],
        shift,
        tagged(),
    )
}

fn generic_22() -> FormSpec {
    form_spec(
        vec![
            vec!["1", "0", "0", "0"],
            vec!["0", "sqrt(2)", "0", "0"],
            vec!["0", "0", "-1", "0"],
            vec!["0", "0", "0", "-sqrt(3)"],
        ],
        vec!["0", "0", "0", "0"],
        tagged(),
    )
}

fn diophantine_flux() -> [f64; 2] {
    [2f64.sqrt() - 1.0, 3f64.sqrt() - 1.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CountParams {
    pub form: FormSpec,
    pub region: StarRegion,
    pub a: f64,
    pub b: f64,
    pub t: f64,
    pub exclude_exceptional: bool,
    pub t_search: f64,
}

impl Default for CountParams {
    fn default() -> Self {
        CountParams {
            form: irrational_31(),
            region: StarRegion::Ball { dim: 4, radius: 1.0 },
            a: -1.0,
            b: 1.0,
            t: 20.0,
            exclude_exceptional: false,
            t_search: 50.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AsymptoticParams {
    pub form: FormSpec,
    pub region: StarRegion,
    pub a: f64,
    pub b: f64,
    pub t_grid: Vec<f64>,
    pub samples_per_t: u64,
    pub exclude_exceptional: bool,
    pub t_search: f64,
}

impl Default for AsymptoticParams {
    fn default() -> Self {
        AsymptoticParams {
            form: irrational_31(),
            region: StarRegion::Ball { dim: 4, radius: 1.0 },
            a: -1.0,
            b: 1.0,
            t_grid: vec![10.0, 15.0, 20.0],
            samples_per_t: 200_000,
            exclude_exceptional: false,
            t_search: 50.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VolumeParams {
    pub form: FormSpec,
    pub region: StarRegion,
    pub a: f64,
    pub b: f64,
    pub t_grid: Vec<f64>,
    pub samples_per_t: u64,
}

impl Default for VolumeParams {
    fn default() -> Self {
        VolumeParams {
            form: irrational_31(),
            region: StarRegion::Ball { dim: 4, radius: 1.0 },
            a: -1.0,
            b: 1.0,
            t_grid: vec![20.0, 30.0, 40.0],
            samples_per_t: 200_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubspacesParams {
    pub form: FormSpec,
    pub t_search: f64,
    pub include_quasinull: bool,
    pub mu1: f64,
    pub node_cap: u64,
}

impl Default for SubspacesParams {
    fn default() -> Self {
        SubspacesParams {
            form: split_22(vec!["0", "0", "0", "0"]),
            t_search: 10.0,
            include_quasinull: false,
            mu1: 0.1,
            node_cap: 1 << 30,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExceptionalParams {
    pub form: FormSpec,
    pub t_search: f64,
}

impl Default for ExceptionalParams {
    fn default() -> Self {
        ExceptionalParams { form: split_22(vec!["1/2", "0", "0", "0"]), t_search: 20.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthFamily {
    NullFirstType,
    NullSecondType,
    NullVectors21,
    Quasinull,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrowthParams {
    pub family: GrowthFamily,
    pub t_grid: Vec<f64>,
    /// Only for `quasinull`.
    pub form: Option<FormSpec>,
    pub mu1: f64,
    pub node_cap: u64,
}

impl Default for GrowthParams {
    fn default() -> Self {
        GrowthParams { family: GrowthFamily::NullFirstType, t_grid: vec![100.0, 1000.0], form: None, mu1: 0.1, node_cap: 1 << 30 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiophantineParams {
    /// Tagged values: rationals, decimals or combinations of square roots.
    pub xi: Vec<Entry>,
    pub delta_grid: Vec<f64>,
    pub mode: DenominatorMode,
}

impl Default for DiophantineParams {
    fn default() -> Self {
        DiophantineParams {
            xi: vec![text("sqrt(2) - 1"), text("sqrt(3) - 1")],
            delta_grid: geometric_grid(1e-1, 1e-6, 6),
            mode: DenominatorMode::Independent,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EwasParams {
    pub form: FormSpec,
    pub r_grid: Vec<u64>,
    pub coeff_bound: i64,
    pub certificate_bound: i64,
}

impl Default for EwasParams {
    fn default() -> Self {
        EwasParams { form: generic_22(), r_grid: vec![10, 100, 1000], coeff_bound: 10_000_000, certificate_bound: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyParams {
    pub form: FormSpec,
    pub r_grid: Vec<u64>,
    pub coeff_bound: i64,
    pub certificate_bound: i64,
    pub delta_grid: Vec<f64>,
    pub mode: DenominatorMode,
    pub ewas_exponent: f64,
    pub kappa_max: f64,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        let c = ClassifyConfig::default();
        ClassifyParams {
            form: split_22(vec!["sqrt(2) - 1", "sqrt(3) - 1", "0", "0"]),
            r_grid: vec![10, 100, 1000],
            coeff_bound: c.ewas.coeff_bound,
            certificate_bound: c.ewas.certificate_bound,
            delta_grid: c.delta_grid,
            mode: c.mode,
            ewas_exponent: c.ewas_exponent,
            kappa_max: c.kappa_max,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumParams {
    pub torus: Torus,
    pub lambda_max: f64,
}

impl Default for SpectrumParams {
    fn default() -> Self {
        SpectrumParams { torus: Torus::square(diophantine_flux()), lambda_max: 1e4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PaircorrParams {
    pub torus: Torus,
    pub a: f64,
    pub b: f64,
    pub t: f64,
}

impl Default for PaircorrParams {
    fn default() -> Self {
        PaircorrParams { torus: Torus::square(diophantine_flux()), a: 0.1, b: 1.1, t: 1e5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BerryTaborParams {
    pub torus: Torus,
    pub a: f64,
    pub b: f64,
    pub t_grid: Vec<f64>,
}

impl Default for BerryTaborParams {
    fn default() -> Self {
        BerryTaborParams { torus: Torus::square(diophantine_flux()), a: 0.1, b: 1.1, t_grid: vec![1e4, 1e5] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlphaMomentParams {
    /// Either a lattice or a form whose frame `gℤⁿ` is used.
    pub lattice: Option<FullLattice>,
    pub form: Option<FormSpec>,
    pub group: OrbitGroup,
    pub i_list: Vec<usize>,
    pub s: f64,
    pub t_grid: Vec<f64>,
    pub grid: KGrid,
}

impl Default for AlphaMomentParams {
    fn default() -> Self {
        AlphaMomentParams {
            lattice: None,
            form: Some(generic_22()),
            group: OrbitGroup::Split22,
            i_list: vec![1, 2, 3],
            s: 1.5,
            t_grid: vec![1.0, 2.0, 3.0],
            grid: KGrid::square(16),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SiegelParams {
    pub lattice: FullLattice,
    pub function: TestFunction,
    pub num_shifts: usize,
}

impl Default for SiegelParams {
    fn default() -> Self {
        SiegelParams { lattice: FullLattice::standard(4), function: TestFunction::radial_step(1.0), num_shifts: 2000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShrinkParams {
    pub subspace: Vec<Vec<i64>>,
    pub lattice: FullLattice,
    pub t_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
    pub grid: KGrid,
}

impl Default for ShrinkParams {
    fn default() -> Self {
        ShrinkParams {
            subspace: vec![vec![1, 0, 0, 0], vec![0, 1, 0, 0]],
            lattice: FullLattice::standard(4),
            t_grid: vec![5.0, 6.0, 7.0],
            delta_grid: vec![0.4, 0.2, 0.1],
            grid: KGrid { theta: 4096, phi: 8 },
        }
    }
}

fn typed<P: DeserializeOwned + Default>(value: Option<serde_json::Value>) -> Result<P, CliError> {
    match value {
        None => Ok(P::default()),
        Some(v) => serde_json::from_value(v).map_err(|e| CliError::Validation(format!("parameters: {e}"))),
    }
}

fn canonical<P: DeserializeOwned + Default + Serialize>(value: Option<serde_json::Value>) -> Result<serde_json::Value, CliError> {
    let p: P = typed(value)?;
    serde_json::to_value(p).map_err(|e| CliError::Validation(format!("parameters: {e}")))
}

/// Validates the experiment parameters and fills defaults.
pub fn resolve_parameters(e: Experiment, value: Option<serde_json::Value>) -> Result<serde_json::Value, CliError> {
    match e {
        Experiment::Count => canonical::<CountParams>(value),
        Experiment::Asymptotic => canonical::<AsymptoticParams>(value),
        Experiment::Volume => canonical::<VolumeParams>(value),
        Experiment::Subspaces => canonical::<SubspacesParams>(value),
        Experiment::Exceptional => canonical::<ExceptionalParams>(value),
        Experiment::QuasinullGrowth => canonical::<GrowthParams>(value),
        Experiment::Diophantine => canonical::<DiophantineParams>(value),
        Experiment::Ewas => canonical::<EwasParams>(value),
        Experiment::Classify => canonical::<ClassifyParams>(value),
        Experiment::Spectrum => canonical::<SpectrumParams>(value),
        Experiment::Paircorr => canonical::<PaircorrParams>(value),
        Experiment::BerryTabor => canonical::<BerryTaborParams>(value),
        Experiment::AlphaMoment => canonical::<AlphaMomentParams>(value),
        Experiment::Siegel => canonical::<SiegelParams>(value),
        Experiment::ShrinkProfile => canonical::<ShrinkParams>(value),
    }
}

fn check_interval(a: f64, b: f64) -> Result<(), CliError> {
    if !(a < b) {
        return Err(Error::InvalidInterval { a, b }.into());
    }
    Ok(())
}

fn four_dim(form: &LoadedForm) -> Result<(), CliError> {
    if form.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: form.dim() }.into());
    }
    Ok(())
}

pub fn run(config: &ResolvedConfig) -> Result<Artifact, CliError> {
    let params = Some(config.parameters.clone());
    match config.experiment {
        Experiment::Count => count(typed(params)?),
        Experiment::Asymptotic => asymptotic(typed(params)?, config.seed),
        Experiment::Volume => volume(typed(params)?, config.seed),
        Experiment::Subspaces => subspaces(typed(params)?),
        Experiment::Exceptional => exceptional(typed(params)?),
        Experiment::QuasinullGrowth => growth(typed(params)?),
        Experiment::Diophantine => diophantine(typed(params)?),
        Experiment::Ewas => ewas(typed(params)?),
        Experiment::Classify => classify(typed(params)?),
        Experiment::Spectrum => spectrum(typed(params)?),
        Experiment::Paircorr => paircorr(typed(params)?),
        Experiment::BerryTabor => berry_tabor(typed(params)?),
        Experiment::AlphaMoment => alpha_moment(typed(params)?),
        Experiment::Siegel => siegel(typed(params)?, config.seed),
        Experiment::ShrinkProfile => shrink(typed(params)?),
    }
}

fn count(p: CountParams) -> Result<Artifact, CliError> {
    check_interval(p.a, p.b)?;
    p.region.validate()?;
    let form = p.form.load()?;
    let result = with_form!(&form, f => {
        if p.exclude_exceptional {
            let ex = exceptional_subspaces(f, p.t_search)?;
            count_n_tilde(f, &p.region, p.a, p.b, p.t, &ex)?
        } else {
            count_n(f, &p.region, p.a, p.b, p.t)?
        }
    });
    let mut art = Artifact::new(&["T", "a", "b", "N", "Ntilde", "excluded", "boundary_flagged", "exact"], &result)?;
    let excluded: Vec<i64> = result.excluded.iter().map(|&x| x as i64).collect();
    art.row(vec![
        num(result.t),
        num(result.a),
        num(result.b),
        result.n_total.to_string(),
        result.n_tilde.to_string(),
        ints(&excluded),
        result.boundary_flagged.to_string(),
        result.exact.to_string(),
    ]);
    Ok(art)
}

fn asymptotic(p: AsymptoticParams, seed: u64) -> Result<Artifact, CliError> {
    check_interval(p.a, p.b)?;
    p.region.validate()?;
    let form = p.form.load()?;
    let (fit, rows, ex) = with_form!(&form, f => {
        let fit = lambda_fit(f, &p.region, p.a, p.b, &p.t_grid, p.samples_per_t, seed)?;
        let ex = if p.exclude_exceptional { exceptional_subspaces(f, p.t_search)? } else { Vec::new() };
        let rows = asymptotic_table(f, &p.region, p.a, p.b, &p.t_grid, fit.lambda_hat, &ex)?;
        (fit, rows, ex)
    });
    let json = serde_json::json!({ "lambda_fit": fit, "rows": rows, "exceptional": ex });
    let mut art = Artifact::new(&["T", "N", "Ntilde", "ratio_N", "ratio_Ntilde"], json)?;
    for r in &rows {
        art.row(vec![num(r.t), r.n.to_string(), r.n_tilde.to_string(), num(r.ratio_n), num(r.ratio_n_tilde)]);
    }
    Ok(art)
}

fn volume(p: VolumeParams, seed: u64) -> Result<Artifact, CliError> {
    check_interval(p.a, p.b)?;
    p.region.validate()?;
    let form = p.form.load()?;
    let fit = with_form!(&form, f => lambda_fit(f, &p.region, p.a, p.b, &p.t_grid, p.samples_per_t, seed)?);
    let mut art = Artifact::new(
        &["T", "volume", "std_error", "samples", "accepted", "lambda_hat", "lambda_std_error", "drift"],
        &fit,
    )?;
    for s in &fit.shells {
        art.row(vec![
            num(s.t),
            num(s.volume),
            num(s.std_error),
            s.samples.to_string(),
            s.accepted.to_string(),
            num(fit.lambda_hat),
            num(fit.std_error),
            num(fit.drift),
        ]);
    }
    Ok(art)
}

#[derive(Serialize)]
struct SubspaceRecord {
    basis: Vec<Vec<i64>>,
    wedge: Vec<i64>,
    #[serde(rename = "type")]
    kind: String,
    norms: (f64, f64),
}

fn describe<S: Scalar>(q: &oppenheim_core::SymmetricForm<S>, l: &RationalSubspace, kind: Option<String>) -> Result<SubspaceRecord, CliError> {
    let split = invariant_split(q)?;
    let w = l.wedge();
    let w6: [i64; 6] = w.clone().try_into().map_err(|_| CliError::Validation("subspace is not a 2-plane in ℝ⁴".into()))?;
    let kind = match kind {
        Some(k) => k,
        None => format!("{:?}", null_criterion(q, l)?),
    };
    Ok(SubspaceRecord { basis: l.basis().to_vec(), wedge: w, kind, norms: split.projection_norms(&w6) })
}

fn subspace_table(records: &[SubspaceRecord], json: serde_json::Value) -> Result<Artifact, CliError> {
    let mut art = Artifact::new(&["basis", "wedge", "type", "norm_pi1", "norm_pi2"], json)?;
    for r in records {
        let basis: Vec<String> = r.basis.iter().map(|v| ints(v)).collect();
        art.row(vec![basis.join(";"), ints(&r.wedge), r.kind.clone(), num(r.norms.0), num(r.norms.1)]);
    }
    Ok(art)
}

fn subspaces(p: SubspacesParams) -> Result<Artifact, CliError> {
    let form = p.form.load()?;
    four_dim(&form)?;
    let records = with_form!(&form, f => {
        let q = f.homogeneous();
        let mut out = Vec::new();
        for l in null_subspaces(q, p.t_search)? {
            out.push(describe(q, &l, None)?);
        }
        if p.include_quasinull {
            let split = invariant_split(q)?;
            for l in enumerate_quasinull(q, p.mu1, p.t_search, p.node_cap)? {
                let rep = quasinull_test(&split, &l, p.mu1)?;
                out.push(describe(q, &l, Some(format!("Quasinull{:?}", rep.kind)))?);
            }
        }
        out
    });
    let json = serde_json::to_value(&records).map_err(|e| CliError::Io(e.to_string()))?;
    subspace_table(&records, json)
}

fn exceptional(p: ExceptionalParams) -> Result<Artifact, CliError> {
    let form = p.form.load()?;
    four_dim(&form)?;
    let witnesses = with_form!(&form, f => exceptional_subspaces(f, p.t_search)?);
    let mut art = Artifact::new(&["basis", "integral_shift", "residual", "certified"], &witnesses)?;
    for w in &witnesses {
        let basis: Vec<String> = w.subspace.basis().iter().map(|v| ints(v)).collect();
        art.row(vec![basis.join(";"), ints(&w.integral_shift), num(w.residual), w.certified.to_string()]);
    }
    Ok(art)
}

fn growth(p: GrowthParams) -> Result<Artifact, CliError> {
    let mut counts = Vec::new();
    for &t in &p.t_grid {
        let c = match p.family {
            GrowthFamily::NullFirstType => enumerate_null_first_type(t).len(),
            GrowthFamily::NullSecondType => enumerate_null_second_type(t).len(),
            GrowthFamily::NullVectors21 => null_vectors_21(t).len(),
            GrowthFamily::Quasinull => {
                let spec = p.form.as_ref().ok_or_else(|| CliError::Validation("quasinull growth needs `form`".into()))?;
                let form = spec.load()?;
                four_dim(&form)?;
                with_form!(&form, f => enumerate_quasinull(f.homogeneous(), p.mu1, t, p.node_cap)?.len())
            }
        };
        counts.push((t, c as u64));
    }
    let json = serde_json::json!({ "family": p.family, "counts": counts });
    let mut art = Artifact::new(&["T", "count"], json)?;
    for (t, c) in counts {
        art.row(vec![num(t), c.to_string()]);
    }
    Ok(art)
}

fn diophantine(p: DiophantineParams) -> Result<Artifact, CliError> {
    let xi: Vec<Real> = p
        .xi
        .iter()
        .map(|e| match e {
            Entry::Number(x) => dyadic(*x).map(Real::Exact).ok_or_else(|| CliError::Validation(format!("non-finite xi {x}"))),
            Entry::Text(s) => parse_tagged(s).map_err(CliError::from),
        })
        .collect::<Result<_, _>>()?;
    let report = estimate_kappa(&xi, &p.delta_grid, p.mode)?;
    let mut art = Artifact::new(&["delta", "quality", "log10_quality", "kappa_hat"], &report)?;
    for q in &report.qualities {
        art.row(vec![num(q.delta), num(q.quality), num(q.log10_quality), opt(report.kappa_hat())]);
    }
    Ok(art)
}

fn ewas_config(r_grid: &[u64], coeff_bound: i64, certificate_bound: i64) -> EwasConfig {
    EwasConfig { r_grid: r_grid.to_vec(), coeff_bound, certificate_bound }
}

fn ewas(p: EwasParams) -> Result<Artifact, CliError> {
    let form = p.form.load()?;
    four_dim(&form)?;
    let cfg = ewas_config(&p.r_grid, p.coeff_bound, p.certificate_bound);
    let report = with_form!(&form, f => ewas_search(f.homogeneous(), &cfg)?);
    let mut art = Artifact::new(&["r", "best_norm", "log10_norm", "exponent_hat"], &report)?;
    for e in &report.entries {
        let (n, l) = e.best.as_ref().map(|c| (num(c.norm), num(c.log10_norm))).unwrap_or_default();
        art.row(vec![e.r.to_string(), n, l, opt(report.exponent_hat)]);
    }
    Ok(art)
}

fn classify(p: ClassifyParams) -> Result<Artifact, CliError> {
    let form = p.form.load()?;
    four_dim(&form)?;
    let cfg = ClassifyConfig {
        ewas: ewas_config(&p.r_grid, p.coeff_bound, p.certificate_bound),
        delta_grid: p.delta_grid.clone(),
        mode: p.mode,
        ewas_exponent: p.ewas_exponent,
        kappa_max: p.kappa_max,
    };
    let c = with_form!(&form, f => classify_form(f, &cfg)?);
    let mut art = Artifact::new(&["verdict", "disjunct", "ewas_exponent", "exact_split", "kappa_hat"], &c)?;
    let verdict = serde_json::to_value(c.verdict).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
    art.row(vec![
        verdict,
        c.disjunct.map(|d| d.to_string()).unwrap_or_default(),
        opt(c.ewas.exponent_hat),
        c.ewas.exact_split.to_string(),
        opt(c.shift.as_ref().and_then(|s| s.kappa_hat())),
    ]);
    Ok(art)
}

fn spectrum(p: SpectrumParams) -> Result<Artifact, CliError> {
    let s = eigenvalues(&p.torus, p.lambda_max)?;
    let mut art = Artifact::new(&["eigenvalue"], &s)?;
    for v in &s.values {
        art.row(vec![num17(*v)]);
    }
    Ok(art)
}

fn paircorr(p: PaircorrParams) -> Result<Artifact, CliError> {
    check_interval(p.a, p.b)?;
    let s = eigenvalues(&p.torus, p.t)?;
    let r = pair_correlation(&s, p.a, p.b, p.t)?;
    let c2 = s.weyl_c * s.weyl_c;
    let dev = (r / (c2 * (p.b - p.a)) - 1.0).abs();
    let json = serde_json::json!({ "t": p.t, "a": p.a, "b": p.b, "r": r, "c_squared": c2, "deviation": dev, "levels": s.values.len() });
    let mut art = Artifact::new(&["T", "a", "b", "R", "c_squared", "deviation"], json)?;
    art.row(vec![num(p.t), num(p.a), num(p.b), num(r), num(c2), num(dev)]);
    Ok(art)
}

fn berry_tabor(p: BerryTaborParams) -> Result<Artifact, CliError> {
    check_interval(p.a, p.b)?;
    let rows = berry_tabor_table(&p.torus, p.a, p.b, &p.t_grid)?;
    let mut art = Artifact::new(&["T", "R", "c_squared", "deviation"], &rows)?;
    for r in &rows {
        art.row(vec![num(r.t), num(r.r), num(r.c_squared), num(r.deviation)]);
    }
    Ok(art)
}

fn alpha_moment(p: AlphaMomentParams) -> Result<Artifact, CliError> {
    let lattice = match (&p.lattice, &p.form) {
        (Some(l), None) => l.clone(),
        (None, Some(spec)) => form_frame(spec.load()?.to_f64().homogeneous(), p.group)?,
        _ => return Err(CliError::Validation("alpha-moment needs exactly one of `lattice` and `form`".into())),
    };
    let mut reports = Vec::new();
    for &t in &p.t_grid {
        for &i in &p.i_list {
            reports.push(orbit_alpha_moment(&lattice, p.group, i, p.s, t, p.grid)?);
        }
    }
    let json = serde_json::json!({ "lattice": lattice, "moments": reports, "node_cap": ALPHA_NODE_CAP });
    let mut art = Artifact::new(&["t", "i", "s", "moment", "unsaturated"], json)?;
    for r in &reports {
        art.row(vec![num(r.t), r.i.to_string(), num(r.s), num(r.moment), r.unsaturated.to_string()]);
    }
    Ok(art)
}

fn siegel(p: SiegelParams, seed: u64) -> Result<Artifact, CliError> {
    let r = siegel_average(&p.function, &p.lattice, p.num_shifts, seed)?;
    let mut art = Artifact::new(&["mean", "std_error", "exact_integral", "expected", "z_score"], &r)?;
    art.row(vec![num(r.mean), num(r.std_error), num(r.exact_integral), num(r.expected), num(r.z_score())]);
    Ok(art)
}

fn shrink(p: ShrinkParams) -> Result<Artifact, CliError> {
    let l = RationalSubspace::from_spanning(&p.subspace)?;
    let profile = shrink_profile(&l, &p.lattice, &p.t_grid, &p.delta_grid, p.grid)?;
    let mut art = Artifact::new(
        &["t", "delta", "measure", "theta_extent", "phi_extent", "min_d", "t_exponent", "delta_exponent"],
        &profile,
    )?;
    for r in &profile.rows {
        art.row(vec![
            num(r.t),
            num(r.delta),
            num(r.measure),
            num(r.theta_extent),
            num(r.phi_extent),
            num(r.min_d),
            opt(profile.t_exponent),
            opt(profile.delta_exponent),
        ]);
    }
    Ok(art)
}
