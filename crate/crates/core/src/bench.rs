//! Benchmark protocol: instance setup, builds, timings and metric CSVs.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use faer::c64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::clustering::{
    build_block_tree, build_cluster_tree, AdmissibilityParams, BlockClusterTree, ClusterTree,
    Criterion,
};
use crate::error::{invalid, Result};
use crate::geometry::{generate_sphere, generate_torus_knot, load_points, Geometry};
use crate::hmatrix::{assemble_h, matvec_h, storage_report, HMatrix, StorageReport};
use crate::kernels::{EntryOracle, KernelKind, KernelSpec, DENSE_CAP};
use crate::lowrank::ToleranceSpec;
use crate::uniform::{
    compress_h_to_uh, direct_build_uh_reusing, direct_build_uh_with, matvec_uh, storage_report_uh,
    ClusterTolerances, CoefficientScaling, DirectBuildOptions, DirectBuildStats, UniformHMatrix,
};
use crate::verification::{
    compression_error, global_bound_check, ErrorRow, HOperator, LinearOperator, UhOperator,
    BOUND_CHECK_CAP,
};

pub const METRICS_HEADER: &str = "# uhm-kit metrics v1";
/// Reference H-matrices used when no dense matrix fits are built this much
/// tighter than the tolerance under test.
pub const REFERENCE_FACTOR: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Sphere,
    Knot,
    File,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeometrySpec {
    pub kind: GeometryKind,
    pub n: usize,
    pub seed: u64,
    pub path: Option<PathBuf>,
}

impl GeometrySpec {
    pub fn sphere(n: usize, seed: u64) -> Self {
        Self {
            kind: GeometryKind::Sphere,
            n,
            seed,
            path: None,
        }
    }

    pub fn generate(&self) -> Result<Geometry> {
        match self.kind {
            GeometryKind::Sphere => generate_sphere(self.n, 1.0, self.seed),
            GeometryKind::Knot => generate_torus_knot(self.n, 2, 3, 1.0, 0.25),
            GeometryKind::File => {
                let path = self
                    .path
                    .as_ref()
                    .ok_or_else(|| invalid("geometry=file needs a path"))?;
                load_points(path)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            GeometryKind::Sphere => "sphere",
            GeometryKind::Knot => "knot",
            GeometryKind::File => "file",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    H,
    Uh,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::H => "h",
            Format::Uh => "uh",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormatSelector {
    H,
    Uh,
    Both,
}

impl FormatSelector {
    pub fn formats(self) -> Vec<Format> {
        match self {
            FormatSelector::H => vec![Format::H],
            FormatSelector::Uh => vec![Format::Uh],
            FormatSelector::Both => vec![Format::H, Format::Uh],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub geometry: GeometrySpec,
    pub kernel: KernelKind,
    /// Wavenumber times the largest nearest-neighbour spacing.
    pub kappa_h: f64,
    pub eta: f64,
    pub criterion: Criterion,
    pub n_min: usize,
    pub eps: f64,
    pub workers: usize,
    pub format: FormatSelector,
    pub out: Option<PathBuf>,
    /// Timed matrix-vector products per format; 0 skips timing.
    pub repeats: usize,
    /// Estimate the relative spectral error of every build.
    pub error_estimate: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            geometry: GeometrySpec::sphere(2000, 0),
            kernel: KernelKind::Laplace,
            kappa_h: 0.1,
            eta: 10.0,
            criterion: Criterion::Weak,
            n_min: 30,
            eps: 1e-4,
            workers: crate::parallel::default_workers(),
            format: FormatSelector::Both,
            out: None,
            repeats: 0,
            error_estimate: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.geometry.n == 0 && self.geometry.kind != GeometryKind::File {
            return Err(invalid("n must be positive"));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(invalid(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(invalid(format!("eta must be positive, got {}", self.eta)));
        }
        if self.n_min == 0 {
            return Err(invalid("nmin must be positive"));
        }
        if self.workers == 0 {
            return Err(invalid("workers must be positive"));
        }
        if !(self.kappa_h >= 0.0 && self.kappa_h.is_finite()) {
            return Err(invalid(format!(
                "kappa-h must be non-negative, got {}",
                self.kappa_h
            )));
        }
        Ok(())
    }

    pub fn instance_name(&self) -> String {
        format!(
            "{}-{}-s{}",
            self.geometry.name(),
            self.geometry.n,
            self.geometry.seed
        )
    }
}

/// Geometry, trees and entry oracle for one configuration.
pub struct Instance {
    pub geometry: Geometry,
    pub tree: Arc<ClusterTree>,
    pub bct: Arc<BlockClusterTree>,
    pub oracle: EntryOracle,
    pub kappa: f64,
}

pub fn prepare(config: &RunConfig) -> Result<Instance> {
    config.validate()?;
    let geometry = config.geometry.generate()?;
    let kappa = match config.kernel {
        KernelKind::Laplace => 0.0,
        KernelKind::Helmholtz => {
            let h = geometry.max_nearest_neighbor_spacing();
            if h > 0.0 {
                config.kappa_h / h
            } else {
                0.0
            }
        }
    };
    let spec = KernelSpec::for_geometry(config.kernel, kappa, &geometry)?;
    let tree = Arc::new(build_cluster_tree(&geometry, config.n_min)?);
    let params = AdmissibilityParams::new(config.eta, config.criterion)?;
    let bct = Arc::new(build_block_tree(tree.clone(), tree.clone(), params));
    let oracle = EntryOracle::symmetric(&geometry, &tree, spec)?;
    Ok(Instance {
        geometry,
        tree,
        bct,
        oracle,
        kappa,
    })
}

pub enum Built {
    H(HMatrix),
    Uh(UniformHMatrix, DirectBuildStats),
}

impl Built {
    pub fn format(&self) -> Format {
        match self {
            Built::H(_) => Format::H,
            Built::Uh(..) => Format::Uh,
        }
    }

    pub fn storage(&self) -> StorageReport {
        match self {
            Built::H(h) => storage_report(h),
            Built::Uh(u, _) => storage_report_uh(u),
        }
    }

    pub fn matvec(&self, v: &[c64], workers: usize) -> Result<Vec<c64>> {
        match self {
            Built::H(h) => matvec_h(h, v, workers),
            Built::Uh(u, _) => matvec_uh(u, v, workers),
        }
    }

    pub fn operator(&self, workers: usize) -> Box<dyn LinearOperator + '_> {
        match self {
            Built::H(h) => Box::new(HOperator { h, workers }),
            Built::Uh(uh, _) => Box::new(UhOperator { uh, workers }),
        }
    }
}

/// H: cross approximation at `eps`, recompression at `eps/10`.
pub fn build_h(inst: &Instance, eps: f64, workers: usize) -> HMatrix {
    assemble_h(
        &inst.oracle,
        &inst.bct,
        ToleranceSpec::relative(eps),
        ToleranceSpec::relative(eps / 10.0),
        workers,
    )
}

pub fn build(inst: &Instance, format: Format, eps: f64, workers: usize) -> (Built, f64) {
    let t0 = Instant::now();
    let built = match format {
        Format::H => Built::H(build_h(inst, eps, workers)),
        Format::Uh => {
            let (u, s) = direct_build_uh_with(
                &inst.oracle,
                &inst.bct,
                &DirectBuildOptions::from_eps(eps, workers),
            );
            Built::Uh(u, s)
        }
    };
    (built, t0.elapsed().as_secs_f64())
}

/// Either the dense matrix or a tightly compressed H-matrix.
pub enum Reference {
    Dense(faer::Mat<c64>),
    H(HMatrix),
}

impl Reference {
    /// Dense when `n^2` fits [`DENSE_CAP`], otherwise an H-matrix at
    /// `eps * REFERENCE_FACTOR`.
    pub fn for_instance(inst: &Instance, eps: f64, workers: usize) -> Result<Self> {
        let n = inst.oracle.nrows();
        if n * n <= DENSE_CAP {
            Ok(Reference::Dense(inst.oracle.dense_matrix(DENSE_CAP)?))
        } else {
            Ok(Reference::H(build_h(inst, eps * REFERENCE_FACTOR, workers)))
        }
    }

    pub fn operator(&self, workers: usize) -> Box<dyn LinearOperator + '_> {
        match self {
            Reference::Dense(d) => Box::new(d),
            Reference::H(h) => Box::new(HOperator { h, workers }),
        }
    }
}

pub fn random_vector(n: usize, seed: u64) -> Vec<c64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            c64::new(
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            )
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Timing {
    pub mean: f64,
    pub min: f64,
    pub samples: usize,
}

/// One untimed warm-up product, then `repeats` timed products on the same
/// seeded vector. Returns the timing and the last result.
pub fn time_matvec(
    built: &Built,
    repeats: usize,
    seed: u64,
    workers: usize,
) -> Result<(Timing, Vec<c64>)> {
    let n = match built {
        Built::H(h) => h.ncols(),
        Built::Uh(u, _) => u.ncols(),
    };
    let v = random_vector(n, seed);
    let mut y = built.matvec(&v, workers)?;
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let t0 = Instant::now();
        y = built.matvec(&v, workers)?;
        times.push(t0.elapsed().as_secs_f64());
    }
    let timing = if times.is_empty() {
        Timing {
            mean: 0.0,
            min: 0.0,
            samples: 0,
        }
    } else {
        Timing {
            mean: times.iter().sum::<f64>() / times.len() as f64,
            min: times.iter().copied().fold(f64::INFINITY, f64::min),
            samples: times.len(),
        }
    };
    Ok((timing, y))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub geometry: String,
    pub n: usize,
    pub seed: u64,
    pub kernel: KernelKind,
    pub kappa_h: f64,
    pub kappa: f64,
    pub eta: f64,
    pub criterion: String,
    pub n_min: usize,
    pub eps: f64,
    pub workers: usize,
    pub format: Format,
    pub adm_elements: u64,
    pub dense_elements: u64,
    pub total_elements: u64,
    pub bytes_estimate: u64,
    pub c_sp: usize,
    pub k_max: usize,
    pub l_max: usize,
    pub aca_calls: Option<u64>,
    pub build_s: f64,
    pub matvec_mean_s: Option<f64>,
    pub matvec_min_s: Option<f64>,
    pub rel_spec_err: Option<f64>,
}

impl MetricsRow {
    pub fn new(config: &RunConfig, inst: &Instance, built: &Built, build_s: f64) -> Self {
        let s = built.storage();
        Self {
            geometry: config.geometry.name().to_string(),
            n: inst.geometry.len(),
            seed: config.geometry.seed,
            kernel: config.kernel,
            kappa_h: config.kappa_h,
            kappa: inst.kappa,
            eta: config.eta,
            criterion: criterion_name(config.criterion).to_string(),
            n_min: config.n_min,
            eps: config.eps,
            workers: config.workers,
            format: built.format(),
            adm_elements: s.adm_elements,
            dense_elements: s.dense_elements,
            total_elements: s.total_elements,
            bytes_estimate: s.bytes_estimate,
            c_sp: s.c_sp,
            k_max: s.k_max,
            l_max: s.l_max,
            aca_calls: match built {
                Built::H(_) => None,
                Built::Uh(_, st) => Some(st.aca_calls),
            },
            build_s,
            matvec_mean_s: None,
            matvec_min_s: None,
            rel_spec_err: None,
        }
    }

    /// Row with timing columns cleared, for comparing reruns.
    pub fn without_timings(&self) -> Self {
        Self {
            build_s: 0.0,
            matvec_mean_s: None,
            matvec_min_s: None,
            ..self.clone()
        }
    }
}

pub fn criterion_name(c: Criterion) -> &'static str {
    match c {
        Criterion::Strong => "strong",
        Criterion::Weak => "weak",
    }
}

fn write_csv_with_header<T: Serialize>(
    path: &Path,
    rows: &[T],
    header: Option<&str>,
) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    if let Some(h) = header {
        writeln!(file, "{h}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_metrics_csv(path: impl AsRef<Path>, rows: &[MetricsRow]) -> Result<()> {
    write_csv_with_header(path.as_ref(), rows, Some(METRICS_HEADER))
}

pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let body = text
        .strip_prefix(METRICS_HEADER)
        .map(|b| b.trim_start_matches(['\r', '\n']))
        .unwrap_or(&text);
    let mut r = csv::Reader::from_reader(body.as_bytes());
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

fn out_dir(config: &RunConfig) -> Result<Option<&Path>> {
    match &config.out {
        Some(d) => {
            std::fs::create_dir_all(d)?;
            Ok(Some(d.as_path()))
        }
        None => Ok(None),
    }
}

fn estimate_error(
    reference: &Reference,
    built: &Built,
    workers: usize,
    seed: u64,
) -> Result<crate::verification::ErrorReport> {
    compression_error(
        &*reference.operator(workers),
        &*built.operator(workers),
        crate::verification::DEFAULT_ITERS,
        seed,
    )
}

/// Builds every selected format one after the other, so only one compressed
/// matrix is alive at a time.
fn build_rows(
    config: &RunConfig,
    inst: &Instance,
    reference: Option<&Reference>,
) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::new();
    for format in config.format.formats() {
        let (built, secs) = build(inst, format, config.eps, config.workers);
        let mut row = MetricsRow::new(config, inst, &built, secs);
        if config.repeats > 0 {
            let (t, _) = time_matvec(&built, config.repeats, config.geometry.seed, config.workers)?;
            row.matvec_mean_s = Some(t.mean);
            row.matvec_min_s = Some(t.min);
        }
        if let Some(r) = reference {
            row.rel_spec_err = Some(
                estimate_error(r, &built, config.workers, config.geometry.seed)?
                    .rel_spectral_estimate,
            );
        }
        if let Some(dir) = out_dir(config)? {
            match &built {
                Built::H(h) => h.write_structure_csv(dir.join("h_structure.csv"))?,
                Built::Uh(u, _) => u.write_structure_csv(
                    dir.join("uh_bases.csv"),
                    dir.join("uh_coefficients.csv"),
                )?,
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn cmd_build(config: &RunConfig) -> Result<Vec<MetricsRow>> {
    let inst = prepare(config)?;
    let reference = if config.error_estimate {
        Some(Reference::for_instance(&inst, config.eps, config.workers)?)
    } else {
        None
    };
    let rows = build_rows(config, &inst, reference.as_ref())?;
    if let Some(dir) = out_dir(config)? {
        write_metrics_csv(dir.join("metrics.csv"), &rows)?;
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatvecRow {
    pub instance: String,
    pub format: Format,
    pub workers: usize,
    pub repeats: usize,
    pub mean_s: f64,
    pub min_s: f64,
}

#[derive(Clone, Debug)]
pub struct MatvecReport {
    pub rows: Vec<MatvecRow>,
    /// Mean H time over mean UH time when both were run.
    pub h_over_uh: Option<f64>,
    pub results: Vec<Vec<c64>>,
}

pub fn cmd_matvec(config: &RunConfig, repeats: usize) -> Result<MatvecReport> {
    let inst = prepare(config)?;
    let mut rows = Vec::new();
    let mut results = Vec::new();
    let mut h: Option<HMatrix> = None;
    for format in config.format.formats() {
        let built = match format {
            Format::H => Built::H(build_h(&inst, config.eps, config.workers)),
            Format::Uh => {
                let opts = DirectBuildOptions::from_eps(config.eps, config.workers);
                let (u, s) = match &h {
                    Some(h) => direct_build_uh_reusing(
                        &inst.oracle,
                        &inst.bct,
                        &opts,
                        h.dense_leaves().clone(),
                    )?,
                    None => direct_build_uh_with(&inst.oracle, &inst.bct, &opts),
                };
                Built::Uh(u, s)
            }
        };
        let (t, y) = time_matvec(&built, repeats, config.geometry.seed, config.workers)?;
        rows.push(MatvecRow {
            instance: config.instance_name(),
            format,
            workers: config.workers,
            repeats: t.samples,
            mean_s: t.mean,
            min_s: t.min,
        });
        results.push(y);
        if let Built::H(m) = built {
            h = Some(m);
        }
    }
    let h_over_uh = match (
        rows.iter().find(|r| r.format == Format::H),
        rows.iter().find(|r| r.format == Format::Uh),
    ) {
        (Some(a), Some(b)) if b.mean_s > 0.0 => Some(a.mean_s / b.mean_s),
        _ => None,
    };
    if let Some(dir) = out_dir(config)? {
        write_csv_with_header(&dir.join("matvec.csv"), &rows, None)?;
    }
    Ok(MatvecReport {
        rows,
        h_over_uh,
        results,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Eta,
    Eps,
    N,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeRow {
    pub format: Format,
    /// Exponent of admissible storage against N.
    pub slope_n: f64,
    /// Exponent of admissible storage against N log N.
    pub slope_nlogn: f64,
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub rows: Vec<MetricsRow>,
    pub slopes: Vec<SlopeRow>,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

pub fn cmd_sweep(config: &RunConfig, axis: SweepAxis, values: &[f64]) -> Result<SweepReport> {
    if values.len() < 2 {
        return Err(invalid("a sweep needs at least two values"));
    }
    let configs: Vec<RunConfig> = values
        .iter()
        .map(|&v| {
            let mut c = config.clone();
            match axis {
                SweepAxis::Eta => c.eta = v,
                SweepAxis::Eps => c.eps = v,
                SweepAxis::N => c.geometry.n = v as usize,
            }
            c.out = None;
            c
        })
        .collect();
    for c in &configs {
        c.validate()?;
    }
    let mut rows = Vec::new();
    match axis {
        SweepAxis::Eps => {
            let inst = prepare(&configs[0])?;
            let reference = if config.error_estimate {
                let tightest = values.iter().copied().fold(f64::INFINITY, f64::min);
                Some(Reference::for_instance(&inst, tightest, config.workers)?)
            } else {
                None
            };
            for c in &configs {
                rows.extend(build_rows(c, &inst, reference.as_ref())?);
            }
        }
        _ => {
            for c in &configs {
                let inst = prepare(c)?;
                let reference = if c.error_estimate {
                    Some(Reference::for_instance(&inst, c.eps, c.workers)?)
                } else {
                    None
                };
                rows.extend(build_rows(c, &inst, reference.as_ref())?);
            }
        }
    }
    let mut slopes = Vec::new();
    if axis == SweepAxis::N {
        for format in config.format.formats() {
            let sel: Vec<&MetricsRow> = rows.iter().filter(|r| r.format == format).collect();
            let n: Vec<f64> = sel.iter().map(|r| r.n as f64).collect();
            let nlogn: Vec<f64> = n.iter().map(|v| v * v.ln()).collect();
            let adm: Vec<f64> = sel.iter().map(|r| r.adm_elements as f64).collect();
            slopes.push(SlopeRow {
                format,
                slope_n: loglog_slope(&n, &adm),
                slope_nlogn: loglog_slope(&nlogn, &adm),
            });
        }
    }
    if let Some(dir) = out_dir(config)? {
        write_metrics_csv(dir.join("sweep.csv"), &rows)?;
        if !slopes.is_empty() {
            write_csv_with_header(&dir.join("slopes.csv"), &slopes, None)?;
        }
    }
    Ok(SweepReport { rows, slopes })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundRow {
    pub instance: String,
    pub eps: f64,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub holds: Option<bool>,
    pub note: String,
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub errors: Vec<ErrorRow>,
    pub bound: BoundRow,
}

impl VerifyReport {
    /// False when the bound was checked and violated.
    pub fn passed(&self) -> bool {
        self.bound.holds != Some(false)
    }
}

/// Relative spectral errors of the selected formats and, when the matrix is
/// small enough, an exact check of the global error bound for compressing
/// the H-matrix to uniform format.
pub fn cmd_verify(config: &RunConfig) -> Result<VerifyReport> {
    let inst = prepare(config)?;
    let reference = Reference::for_instance(&inst, config.eps, config.workers)?;
    let name = config.instance_name();
    let mut errors = Vec::new();
    for format in config.format.formats() {
        let (built, _) = build(&inst, format, config.eps, config.workers);
        let r = estimate_error(&reference, &built, config.workers, config.geometry.seed)?;
        errors.push(ErrorRow {
            instance: name.clone(),
            format: format.name().to_string(),
            rel_spec_err: r.rel_spectral_estimate,
            iters: r.iterations,
        });
    }
    let n = inst.oracle.nrows();
    let bound = if n * n <= BOUND_CHECK_CAP {
        let h = assemble_h(
            &inst.oracle,
            &inst.bct,
            ToleranceSpec::relative(config.eps / 3.0),
            ToleranceSpec::relative(config.eps / 10.0),
            config.workers,
        );
        let a = crate::hmatrix::to_dense(&h)?;
        let uh = compress_h_to_uh(
            &h,
            &ClusterTolerances::Relative(config.eps / 3.0),
            CoefficientScaling::SigmaSplit,
            config.workers,
        );
        let t = global_bound_check(a.as_ref(), &uh)?;
        BoundRow {
            instance: name.clone(),
            eps: config.eps,
            lhs: Some(t.lhs),
            rhs: Some(t.rhs),
            holds: Some(t.holds),
            note: String::new(),
        }
    } else {
        BoundRow {
            instance: name.clone(),
            eps: config.eps,
            lhs: None,
            rhs: None,
            holds: None,
            note: format!("skipped: n={n} exceeds the dense check limit"),
        }
    };
    if let Some(dir) = out_dir(config)? {
        crate::verification::write_error_csv(dir.join("errors.csv"), &errors)?;
        write_csv_with_header(
            &dir.join("bound_check.csv"),
            std::slice::from_ref(&bound),
            None,
        )?;
    }
    Ok(VerifyReport { errors, bound })
}

/// Writes the generated geometry as `x,y,z,w` rows.
pub fn cmd_gen(config: &RunConfig, path: impl AsRef<Path>) -> Result<Geometry> {
    config.validate()?;
    let g = config.geometry.generate()?;
    g.write_points(path)?;
    Ok(g)
}
