//! Command-line front end: argument parsing, JSON input handling and
//! deterministic reports.
//!
//! Every command produces a [`Report`] with a versioned schema. The process
//! exit code encodes the verdict: 0 verified, 1 refuted, 2 unknown (a bounded
//! search gave up or a witness is needed), 64 usage or malformed input.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::fibration::{self, FibreConfig, FramingSearch, KodairaType, LoopSplit};
use crate::lattice::{self, IntLattice, Sublattice};
use crate::matrix::{self, Mat, Vector};
use crate::mirror::{self, DegenerationSide, FibrationSide, MirrorWitness, SplitDirection, WitnessMode};
use crate::properties;
use crate::pseudo::{self, PseudoHom, Pseudolattice, QdpModel};
use crate::tyurin::{self, GluedModel};

/// Version of the report layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Exit code for usage errors and malformed input.
pub const EXIT_USAGE: i32 = 64;

/// Overall outcome of a command.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    /// Every checked clause holds.
    Verified,
    /// Some clause fails.
    Refuted,
    /// Undecided within the search bounds, or a witness is needed.
    Unknown,
}

impl Verdict {
    /// Process exit code of the verdict.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Verified => 0,
            Verdict::Refuted => 1,
            Verdict::Unknown => 2,
        }
    }

    fn from_option(v: Option<bool>) -> Verdict {
        match v {
            Some(true) => Verdict::Verified,
            Some(false) => Verdict::Refuted,
            None => Verdict::Unknown,
        }
    }
}

/// Machine-readable result of one invocation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    /// Layout version.
    pub schema: u32,
    /// Arguments after the program name.
    pub command: Vec<String>,
    /// Version of the tool.
    pub tool_version: String,
    /// Wall-clock time of the computation in milliseconds.
    pub timing_ms: u64,
    /// SHA-256 digests of the input files, keyed by the path as given.
    pub inputs: BTreeMap<String, String>,
    /// Overall verdict.
    pub verdict: Verdict,
    /// Command-specific payload.
    pub result: Value,
}

/// Output format.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Pretty-printed JSON.
    Json,
    /// Flattened `key: value` lines.
    Text,
}

#[derive(Parser, Debug)]
#[command(name = "k3mirror", version, about = "Exact lattice verifier for Tyurin degenerations, elliptic fibrations and K3 mirror pairs")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value = "json", global = true)]
    format: Format,
    /// Write the report to this file instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integral lattices.
    #[command(subcommand)]
    Lattice(LatticeCmd),
    /// Pseudolattices and quasi del Pezzo homomorphisms.
    #[command(subcommand)]
    Pseudo(PseudoCmd),
    /// Glued models of Tyurin degenerations.
    #[command(subcommand)]
    Tyurin(TyurinCmd),
    /// Elliptic fibrations over discs and loop splits.
    #[command(subcommand)]
    Fibration(FibrationCmd),
    /// Mirror-pair conditions.
    #[command(subcommand)]
    Mirror(MirrorCmd),
    /// Runs the randomized property suites.
    Selftest(SelftestArgs),
}

#[derive(Subcommand, Debug)]
enum LatticeCmd {
    /// Rank, signature, parity, determinant and discriminant of a lattice.
    Info(LatticeInfoArgs),
}

#[derive(Args, Debug)]
struct LatticeInfoArgs {
    /// Standard name such as `H+E8+E8`.
    #[arg(long, conflicts_with = "file", required_unless_present = "file")]
    name: Option<String>,
    /// JSON file `{"gram": [[...]]}`.
    #[arg(long)]
    file: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum PseudoCmd {
    /// Decides the quasi del Pezzo conditions and names the model.
    Classify {
        /// Hom description (see README).
        #[arg(long)]
        file: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum TyurinCmd {
    /// Glues two quasi del Pezzo homs of opposite degree.
    Build {
        /// First side.
        #[arg(long)]
        pair1: PathBuf,
        /// Second side.
        #[arg(long)]
        pair2: PathBuf,
    },
    /// Checks the lattice conditions of a stable polarisation.
    CheckPolarisation {
        /// Model file (a `tyurin build` report or `{"pair1", "pair2"}`).
        #[arg(long)]
        model: PathBuf,
        /// Polarisation file.
        #[arg(long)]
        lhat: PathBuf,
        /// Effective classes in `NS₁ ⊕ NS₂` coordinates.
        #[arg(long)]
        effective: Option<PathBuf>,
        /// Coefficient cap of the effectivity search.
        #[arg(long, default_value_t = tyurin::DEFAULT_EFFECTIVE_CAP)]
        cap: u32,
    },
}

#[derive(Subcommand, Debug)]
enum FibrationCmd {
    /// Builds the disc fibration of a configuration.
    Build {
        /// Configuration `{"fibres": [...]}`.
        #[arg(long)]
        config: PathBuf,
    },
    /// Decides whether a split of the configuration is an allowable loop.
    CheckAllowable {
        /// Configuration.
        #[arg(long)]
        config: PathBuf,
        /// Split `{"side1": [...], "side2": [...]}` of fibre indices.
        #[arg(long)]
        split: PathBuf,
    },
    /// Checks the fibre-component polarisation of the first side.
    CheckPolarisation {
        /// Configuration.
        #[arg(long)]
        config: PathBuf,
        /// Split of fibre indices.
        #[arg(long)]
        split: PathBuf,
        /// Polarisation `{"gamma": [[...]]}` in the side's NS coordinates; the
        /// saturated component span when absent.
        #[arg(long)]
        gamma: Option<PathBuf>,
        /// Coefficient cap of the effectivity search.
        #[arg(long, default_value_t = tyurin::DEFAULT_EFFECTIVE_CAP)]
        cap: u32,
    },
    /// Searches framings of a fibre list realizing a target monodromy.
    SearchFramings {
        /// Comma-separated fibre types, e.g. `I1,I1,I1`.
        #[arg(long)]
        types: String,
        /// Target monodromy as JSON, e.g. `[[1,-9],[0,1]]`.
        #[arg(long)]
        target: String,
        /// Maximal framing word length.
        #[arg(long, default_value_t = 8)]
        max_word_len: usize,
        /// Number of solutions to report.
        #[arg(long, default_value_t = 1)]
        max_solutions: usize,
    },
}

#[derive(Subcommand, Debug)]
enum MirrorCmd {
    /// Checks that a degeneration and a split fibration form a mirror pair.
    Check {
        /// Degeneration side.
        #[arg(long)]
        degeneration: PathBuf,
        /// Fibration side.
        #[arg(long)]
        fibration: PathBuf,
        /// Explicit witnesses.
        #[arg(long, conflicts_with = "auto")]
        witness: Option<PathBuf>,
        /// Construct the witnesses automatically (the default without `--witness`).
        #[arg(long)]
        auto: bool,
    },
    /// Runs the four degree-two instances.
    DhtSuite {
        /// Directory receiving re-readable input files for every instance.
        #[arg(long)]
        export: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct SelftestArgs {
    /// Seed of the random generator.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cases per property.
    #[arg(long, default_value_t = properties::DEFAULT_CASES)]
    cases: u32,
    /// `all` or a comma-separated list of property names.
    #[arg(long, default_value = "all")]
    properties: String,
}

/// Result of [`run`]: exit code and the text destined for each stream.
#[derive(Clone, Debug)]
pub struct Outcome {
    /// Process exit code.
    pub code: i32,
    /// Text for standard output.
    pub stdout: String,
    /// Text for standard error.
    pub stderr: String,
    /// The report, when one was produced.
    pub report: Option<Report>,
}

/// Failure that aborts a command before a verdict.
#[derive(Debug)]
enum Failure {
    /// Malformed input or invalid arguments.
    Usage(String),
    /// A library error that decides the verdict.
    Verdict(Verdict, String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Input(_) | Error::Dimension(_) | Error::UnknownLattice(_) | Error::UnknownFibre(_) | Error::NotSymmetric => Failure::Usage(e.to_string()),
            Error::Budget(_) => Failure::Verdict(Verdict::Unknown, e.to_string()),
            _ => Failure::Verdict(Verdict::Refuted, e.to_string()),
        }
    }
}

type CmdResult = std::result::Result<(Verdict, Value), Failure>;

/// Collects input files and their digests.
#[derive(Default)]
struct Inputs {
    digests: BTreeMap<String, String>,
}

impl Inputs {
    fn read(&mut self, path: &Path) -> std::result::Result<Vec<u8>, Failure> {
        let bytes = std::fs::read(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        let digest = Sha256::digest(&bytes);
        let hex = digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        });
        self.digests.insert(path.display().to_string(), hex);
        Ok(bytes)
    }

    fn json<T: for<'de> Deserialize<'de>>(&mut self, path: &Path) -> std::result::Result<T, Failure> {
        let bytes = self.read(path)?;
        serde_json::from_slice(&bytes).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
    }
}

/// Runs the tool on `argv` (without the program name) and returns the exit
/// code and rendered output. Files named by `--out` or `--export` are written.
pub fn run<S: AsRef<str>>(argv: &[S]) -> Outcome {
    let args: Vec<String> = argv.iter().map(|s| s.as_ref().to_string()).collect();
    let cli = match Cli::try_parse_from(std::iter::once("k3mirror".to_string()).chain(args.iter().cloned())) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => Outcome { code: 0, stdout: text, stderr: String::new(), report: None },
                _ => Outcome { code: EXIT_USAGE, stdout: String::new(), stderr: text, report: None },
            };
        }
    };
    let mut inputs = Inputs::default();
    let start = Instant::now();
    let res = dispatch(&cli.command, &mut inputs);
    let timing_ms = start.elapsed().as_millis() as u64;
    let (verdict, result) = match res {
        Ok(v) => v,
        Err(Failure::Usage(msg)) => {
            return Outcome { code: EXIT_USAGE, stdout: String::new(), stderr: format!("error: {msg}\n"), report: None };
        }
        Err(Failure::Verdict(v, msg)) => (v, json!({ "error": msg })),
    };
    let report = Report {
        schema: SCHEMA_VERSION,
        command: args,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timing_ms,
        inputs: inputs.digests,
        verdict,
        result,
    };
    let rendered = match cli.format {
        Format::Json => serde_json::to_string_pretty(&report).expect("reports serialize") + "\n",
        Format::Text => render_text(&report),
    };
    let code = verdict.exit_code();
    match &cli.out {
        Some(path) => match std::fs::write(path, &rendered) {
            Ok(()) => Outcome { code, stdout: String::new(), stderr: String::new(), report: Some(report) },
            Err(e) => Outcome { code: EXIT_USAGE, stdout: String::new(), stderr: format!("error: {}: {e}\n", path.display()), report: Some(report) },
        },
        None => Outcome { code, stdout: rendered, stderr: String::new(), report: Some(report) },
    }
}

fn dispatch(cmd: &Command, inputs: &mut Inputs) -> CmdResult {
    match cmd {
        Command::Lattice(LatticeCmd::Info(a)) => lattice_info(a, inputs),
        Command::Pseudo(PseudoCmd::Classify { file }) => pseudo_classify(file, inputs),
        Command::Tyurin(TyurinCmd::Build { pair1, pair2 }) => tyurin_build(pair1, pair2, inputs),
        Command::Tyurin(TyurinCmd::CheckPolarisation { model, lhat, effective, cap }) => tyurin_check_polarisation(model, lhat, effective.as_deref(), *cap, inputs),
        Command::Fibration(FibrationCmd::Build { config }) => fibration_build(config, inputs),
        Command::Fibration(FibrationCmd::CheckAllowable { config, split }) => fibration_check_allowable(config, split, inputs),
        Command::Fibration(FibrationCmd::CheckPolarisation { config, split, gamma, cap }) => fibration_check_polarisation(config, split, gamma.as_deref(), *cap, inputs),
        Command::Fibration(FibrationCmd::SearchFramings { types, target, max_word_len, max_solutions }) => fibration_search_framings(types, target, *max_word_len, *max_solutions),
        Command::Mirror(MirrorCmd::Check { degeneration, fibration, witness, auto: _ }) => mirror_check(degeneration, fibration, witness.as_deref(), inputs),
        Command::Mirror(MirrorCmd::DhtSuite { export }) => mirror_dht_suite(export.as_deref()),
        Command::Selftest(a) => selftest(a),
    }
}

// ---------------------------------------------------------------------------
// Input formats

/// A lattice given by standard name or Gram matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LatticeSpec {
    /// Standard name such as `I(1,9)`.
    Name(String),
    /// Gram matrix.
    Gram(Mat),
}

impl LatticeSpec {
    fn build(&self) -> crate::Result<IntLattice> {
        match self {
            LatticeSpec::Name(n) => lattice::standard_lattice(n),
            LatticeSpec::Gram(g) => IntLattice::new(g.clone()),
        }
    }
}

/// A homomorphism to the elliptic pseudolattice.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HomSpec {
    /// Chain of vanishing-cycle words.
    Words {
        /// Words `[p, q]`.
        words: Vec<[i64; 2]>,
    },
    /// Explicit Gram matrix of the source and matrix of the map.
    Explicit {
        /// Gram matrix of the source pseudolattice.
        gram: Mat,
        /// `2 × n` matrix of the map.
        matrix: Mat,
    },
    /// Anticanonical pair `(NS, K)`.
    Pair {
        /// NS lattice.
        ns: LatticeSpec,
        /// Canonical class.
        #[serde(with = "matrix::vec_serde")]
        k: Vector,
    },
    /// Standard pair of a named model.
    Model(QdpModel),
}

impl HomSpec {
    /// Builds the homomorphism.
    pub fn build(&self) -> crate::Result<PseudoHom> {
        match self {
            HomSpec::Words { words } => pseudo::z_chain_i64(words),
            HomSpec::Explicit { gram, matrix } => PseudoHom::new(Pseudolattice::new(gram.clone())?, pseudo::elliptic_e().0, matrix.clone()),
            HomSpec::Pair { ns, k } => pseudo::from_anticanonical_pair(&ns.build()?, k),
            HomSpec::Model(m) => {
                if let QdpModel::Chain { n } = m {
                    if *n < 3 {
                        return Err(Error::Input("chain models need n ≥ 3".into()));
                    }
                }
                let (q, k) = m.standard_pair();
                pseudo::from_anticanonical_pair(&q, &k)
            }
        }
    }
}

/// Two sides of a gluing. A `tyurin build` report is accepted as well.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelSpec {
    /// First side.
    pub pair1: HomSpec,
    /// Second side.
    pub pair2: HomSpec,
}

impl ModelSpec {
    fn build(&self) -> crate::Result<GluedModel> {
        tyurin::build_glued(&self.pair1.build()?, &self.pair2.build()?)
    }
}

fn model_from_value(v: Value, path: &Path) -> std::result::Result<ModelSpec, Failure> {
    let v = match v.get("result") {
        Some(r) if v.get("schema").is_some() => r.clone(),
        _ => v,
    };
    serde_json::from_value(v).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

/// Vectors in one of the coordinate systems of a glued model.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassSpec {
    /// Classes in `NS(M)` coordinates.
    NsM(Vec<Vec<BigIntJson>>),
    /// Classes of `NS₁ ⊕ NS₂` (lying in `Ψ^⊥_K/Ψ`), projected to `NS(M)`.
    FactorClasses(Vec<Vec<BigIntJson>>),
    /// Classes of `NS₁ ⊕ NS₂` written in the standard frames of the two
    /// factors (for a chain model: hyperplane class, then exceptional classes).
    StandardClasses(Vec<Vec<BigIntJson>>),
}

/// Integer that may be written as a JSON number or a decimal string.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BigIntJson {
    /// Machine integer.
    Small(i64),
    /// Decimal string.
    Big(String),
}

impl BigIntJson {
    fn value(&self) -> std::result::Result<BigInt, Failure> {
        match self {
            BigIntJson::Small(v) => Ok(BigInt::from(*v)),
            BigIntJson::Big(s) => s.parse().map_err(|_| Failure::Usage(format!("bad integer `{s}`"))),
        }
    }

    fn from(x: &BigInt) -> Self {
        match i64::try_from(x) {
            Ok(v) => BigIntJson::Small(v),
            Err(_) => BigIntJson::Big(x.to_string()),
        }
    }
}

fn vectors(raw: &[Vec<BigIntJson>]) -> std::result::Result<Vec<Vector>, Failure> {
    raw.iter().map(|r| r.iter().map(BigIntJson::value).collect()).collect()
}

fn check_dims(vs: &[Vector], n: usize, what: &str) -> std::result::Result<(), Failure> {
    match vs.iter().find(|v| v.len() != n) {
        Some(v) => Err(Failure::Usage(format!("{what}: expected vectors of length {n}, found length {}", v.len()))),
        None => Ok(()),
    }
}

fn ns_m_classes(m: &GluedModel, spec: &ClassSpec) -> std::result::Result<Vec<Vector>, Failure> {
    match spec {
        ClassSpec::NsM(raw) => {
            let vs = vectors(raw)?;
            check_dims(&vs, m.ns_m_lattice().rank(), "NS(M) classes")?;
            Ok(vs)
        }
        ClassSpec::FactorClasses(raw) => {
            let vs = vectors(raw)?;
            check_dims(&vs, m.factors[0].ns().rank() + m.factors[1].ns().rank(), "NS₁ ⊕ NS₂ classes")?;
            project_classes(m, &vs)
        }
        ClassSpec::StandardClasses(raw) => {
            let vs = vectors(raw)?;
            let r1 = m.factors[0].ns().rank();
            check_dims(&vs, r1 + m.factors[1].ns().rank(), "NS₁ ⊕ NS₂ classes")?;
            let mut out = Vec::new();
            for v in &vs {
                let mut x = m.factors[0].from_standard(&v[..r1])?;
                x.extend(m.factors[1].from_standard(&v[r1..])?);
                out.push(x);
            }
            project_classes(m, &out)
        }
    }
}

fn project_classes(m: &GluedModel, vs: &[Vector]) -> std::result::Result<Vec<Vector>, Failure> {
    vs.iter()
        .map(|v| {
            if m.w_coords(v).is_none() {
                return Err(Failure::Usage(format!("class {} does not lie in Ψ^⊥_K/Ψ", matrix::vec_to_json(v))));
            }
            Ok(m.project_ns(v)?)
        })
        .collect()
}

fn to_json_rows(vs: &[Vector]) -> Vec<Vec<BigIntJson>> {
    vs.iter().map(|v| v.iter().map(BigIntJson::from).collect()).collect()
}

/// Split of a configuration by fibre indices.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Fibres on the first side.
    pub side1: Vec<usize>,
    /// Fibres on the second side.
    pub side2: Vec<usize>,
}

/// Polarisation of a degeneration side.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolarisationSpec {
    /// `"hyperplane"`: the hyperplane classes of both factors.
    Named(String),
    /// Explicit classes.
    Classes(ClassSpec),
}

/// Degeneration side of `mirror check`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DegenerationSpec {
    /// First factor.
    pub pair1: HomSpec,
    /// Second factor.
    pub pair2: HomSpec,
    /// Polarisation `L ⊂ NS(M)`.
    pub l: PolarisationSpec,
}

/// Fibration side of `mirror check`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FibrationSpec {
    /// Fibre configuration.
    pub config: FibreConfig,
    /// Loop split.
    pub split: SplitSpec,
    /// Optional `Γ ⊂ NS(M)`; computed from the fibre components when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<Vec<BigIntJson>>>,
}

/// Witness file of `mirror check`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WitnessSpec {
    /// `ψ₁`.
    pub psi1: Mat,
    /// `ψ₂`.
    pub psi2: Mat,
    /// Optional ambient isometry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psihat: Option<Mat>,
    /// Admissibility level.
    #[serde(default = "one")]
    pub m: i64,
    /// Direction of the splitting clause.
    #[serde(default = "from_degeneration")]
    pub direction: SplitDirection,
}

fn one() -> i64 {
    1
}

fn from_degeneration() -> SplitDirection {
    SplitDirection::FromDegeneration
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("report types serialize")
}

// ---------------------------------------------------------------------------
// Commands

fn lattice_info(a: &LatticeInfoArgs, inputs: &mut Inputs) -> CmdResult {
    let (label, l) = match (&a.name, &a.file) {
        (Some(n), _) => (n.clone(), lattice::standard_lattice(n)?),
        (None, Some(f)) => {
            let l: IntLattice = inputs.json(f)?;
            (f.display().to_string(), l)
        }
        (None, None) => return Err(Failure::Usage("one of --name or --file is required".into())),
    };
    let info = lattice::info(&l);
    let sig = info.signature;
    let definite = sig.null == 0 && (sig.pos == 0 || sig.neg == 0) && l.rank() > 0;
    let root_system = if definite && l.is_even() && sig.pos == 0 { Some(lattice::root_system_name(&l)?) } else { None };
    let mut out = to_value(&info);
    out["lattice"] = json!(label);
    if let Some(r) = root_system {
        out["root_system"] = json!(r);
    }
    Ok((Verdict::Verified, out))
}

fn pseudo_classify(file: &Path, inputs: &mut Inputs) -> CmdResult {
    let spec: HomSpec = inputs.json(file)?;
    let f = spec.build()?;
    let v = pseudo::is_quasi_del_pezzo(&f)?;
    let mut out = json!({ "quasi_del_pezzo": v.verdict, "reason": v.reason });
    if let Some(m) = v.model {
        out = merge(to_value(&m), out);
        out["degree"] = to_value(&m.degree());
    }
    Ok((Verdict::from_option(v.verdict), out))
}

fn merge(mut a: Value, b: Value) -> Value {
    if let (Some(am), Value::Object(bm)) = (a.as_object_mut(), b) {
        am.extend(bm);
    }
    a
}

fn tyurin_build(p1: &Path, p2: &Path, inputs: &mut Inputs) -> CmdResult {
    let spec = ModelSpec { pair1: inputs.json(p1)?, pair2: inputs.json(p2)? };
    let m = spec.build()?;
    let summary = m.summary();
    let verdict = if summary.checks.all() { Verdict::Verified } else { Verdict::Refuted };
    let mut out = to_value(&spec);
    out["summary"] = to_value(&summary);
    Ok((verdict, out))
}

/// Polarisation file of `tyurin check-polarisation`.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct LhatSpec {
    /// `L ⊂ NS(M)`, lifted before checking.
    #[serde(default)]
    l: Option<ClassSpec>,
    /// Generators of `L̂` in `NS₁ ⊕ NS₂` coordinates (classes of `Ψ^⊥_K/Ψ`).
    #[serde(default)]
    lhat: Option<Vec<Vec<BigIntJson>>>,
    /// Optional `−2`-classes to test, in `NS(M)` coordinates.
    #[serde(default)]
    roots: Option<Vec<Vec<BigIntJson>>>,
}

/// Effective classes file.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct EffectiveSpec {
    /// Classes in `NS₁ ⊕ NS₂` coordinates.
    classes: Vec<Vec<BigIntJson>>,
}

fn tyurin_check_polarisation(model: &Path, lhat: &Path, effective: Option<&Path>, cap: u32, inputs: &mut Inputs) -> CmdResult {
    let raw: Value = inputs.json(model)?;
    let m = model_from_value(raw, model)?.build()?;
    let spec: LhatSpec = inputs.json(lhat)?;
    let lh = match (&spec.l, &spec.lhat) {
        (Some(c), None) => {
            let vs = ns_m_classes(&m, c)?;
            let l = Sublattice::spanned_by(m.ns_m_lattice().clone(), &vs);
            tyurin::lift_polarisation(&m, &l)?
        }
        (None, Some(raw)) => {
            let vs = vectors(raw)?;
            check_dims(&vs, m.w_basis.rows(), "L̂ generators")?;
            let ws: Vec<Vector> = vs
                .iter()
                .map(|v| m.w_coords(v).ok_or_else(|| Failure::Usage("an L̂ generator does not lie in Ψ^⊥_K/Ψ".into())))
                .collect::<std::result::Result<_, _>>()?;
            Sublattice::spanned_by(m.w.clone(), &ws)
        }
        _ => return Err(Failure::Usage(format!("{}: give exactly one of \"l\" or \"lhat\"", lhat.display()))),
    };
    let eff = match effective {
        Some(p) => {
            let e: EffectiveSpec = inputs.json(p)?;
            let vs = vectors(&e.classes)?;
            check_dims(&vs, m.w_basis.rows(), "effective classes")?;
            vs
        }
        None => vec![],
    };
    let roots = spec.roots.as_deref().map(vectors).transpose()?;
    let report = tyurin::check_stable_polarisation(&m, &lh, &eff, roots.as_deref(), cap)?;
    let l = tyurin::project_polarisation(&m, &lh)?;
    let coupling = if m.degree.value != 0 { Some(tyurin::coupling_group(&m, &l)?) } else { None };
    let torsion = tyurin::torsion_criterion(&m, &l)?;
    let out = json!({
        "degree": m.degree.to_string(),
        "lhat_rank": lh.rank(),
        "l": lattice::info(&l.lattice()),
        "stable": report,
        "coupling": coupling,
        "torsion_criterion": torsion,
    });
    Ok((Verdict::from_option(report.verdict), out))
}

fn fibration_build(config: &Path, inputs: &mut Inputs) -> CmdResult {
    let c: FibreConfig = inputs.json(config)?;
    let f = fibration::build_disc_fibration(&c)?;
    let twist = f.twist()?;
    let mono = c.monodromy_product()?;
    let ok = twist == mono && f.source.is_unimodular() && f.source.rank() == c.euler();
    let out = json!({
        "euler": c.euler(),
        "rank": f.source.rank(),
        "unimodular": f.source.is_unimodular(),
        "word": c.word().iter().map(|v| matrix::vec_to_json(v)).collect::<Vec<_>>(),
        "twist": twist,
        "monodromy_product": mono,
        "twist_is_monodromy": twist == mono,
        "gram": f.source.gram(),
        "matrix": f.matrix,
    });
    Ok((if ok { Verdict::Verified } else { Verdict::Refuted }, out))
}

fn load_split(config: &Path, split: &Path, inputs: &mut Inputs) -> std::result::Result<LoopSplit, Failure> {
    let c: FibreConfig = inputs.json(config)?;
    let s: SplitSpec = inputs.json(split)?;
    Ok(LoopSplit::from_indices(&c, &s.side1, &s.side2)?)
}

fn fibration_check_allowable(config: &Path, split: &Path, inputs: &mut Inputs) -> CmdResult {
    let s = load_split(config, split, inputs)?;
    let r = fibration::allowable_check(&s)?;
    Ok((if r.allowable { Verdict::Verified } else { Verdict::Refuted }, to_value(&r)))
}

/// Polarisation file of `fibration check-polarisation`.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct GammaSpec {
    /// Generators in the first side's NS coordinates.
    gamma: Vec<Vec<BigIntJson>>,
}

fn fibration_check_polarisation(config: &Path, split: &Path, gamma: Option<&Path>, cap: u32, inputs: &mut Inputs) -> CmdResult {
    let s = load_split(config, split, inputs)?;
    let sm = fibration::build_k3_split_model(&s)?;
    let ns = sm.glued.factors[0].ns().clone();
    let comps: Vec<Vector> = fibration::component_classes(&sm, 0)?.into_iter().flat_map(|c| c.classes).collect();
    let g = match gamma {
        Some(p) => {
            let spec: GammaSpec = inputs.json(p)?;
            let vs = vectors(&spec.gamma)?;
            check_dims(&vs, ns.rank(), "Γ generators")?;
            Sublattice::spanned_by(ns.clone(), &vs)
        }
        None => Sublattice::spanned_by(ns.clone(), &comps).saturate(),
    };
    let r = fibration::check_gamma_polarisation(&sm, &g, 0, &comps, cap)?;
    let mut out = to_value(&r);
    out["gamma"] = json!(to_json_rows(&g.generators()));
    out["components"] = json!(to_json_rows(&comps));
    Ok((Verdict::from_option(r.verdict), out))
}

fn fibration_search_framings(types: &str, target: &str, max_word_len: usize, max_solutions: usize) -> CmdResult {
    let kinds: Vec<KodairaType> = types.split(',').map(|t| t.trim().parse()).collect::<crate::Result<_>>()?;
    let target: Mat = serde_json::from_str(target).map_err(|e| Failure::Usage(format!("--target: {e}")))?;
    let opts = FramingSearch { max_word_len, max_solutions, ..FramingSearch::default() };
    let o = fibration::search_framings(&kinds, &target, &opts)?;
    // Framings outside the word-length bound are never examined, so an empty
    // result does not refute existence.
    let verdict = if o.solutions.is_empty() { Verdict::Unknown } else { Verdict::Verified };
    Ok((verdict, json!({ "solutions": o.solutions, "budget_exhausted": o.budget_exhausted })))
}

fn degeneration_side(spec: &DegenerationSpec) -> std::result::Result<DegenerationSide, Failure> {
    let m = tyurin::build_glued(&spec.pair1.build()?, &spec.pair2.build()?)?;
    let l = match &spec.l {
        PolarisationSpec::Named(n) if n == "hyperplane" => mirror::hyperplane_polarisation(&m)?,
        PolarisationSpec::Named(n) => return Err(Failure::Usage(format!("unknown polarisation `{n}`"))),
        PolarisationSpec::Classes(c) => {
            let vs = ns_m_classes(&m, c)?;
            Sublattice::spanned_by(m.ns_m_lattice().clone(), &vs)
        }
    };
    Ok(DegenerationSide { model: m, l })
}

fn fibration_side(spec: &FibrationSpec) -> std::result::Result<FibrationSide, Failure> {
    let split = LoopSplit::from_indices(&spec.config, &spec.split.side1, &spec.split.side2)?;
    let gamma = match &spec.gamma {
        None => None,
        Some(raw) => {
            let sm = fibration::build_k3_split_model(&split)?;
            let vs = vectors(raw)?;
            check_dims(&vs, sm.glued.ns_m_lattice().rank(), "Γ generators")?;
            Some(Sublattice::spanned_by(sm.glued.ns_m_lattice().clone(), &vs))
        }
    };
    Ok(FibrationSide { split, gamma })
}

fn mirror_check(deg: &Path, fib: &Path, witness: Option<&Path>, inputs: &mut Inputs) -> CmdResult {
    let d: DegenerationSpec = inputs.json(deg)?;
    let f: FibrationSpec = inputs.json(fib)?;
    let mode = match witness {
        Some(p) => {
            let w: WitnessSpec = inputs.json(p)?;
            WitnessMode::Supplied(MirrorWitness { psi1: w.psi1, psi2: w.psi2, psihat: w.psihat, m: w.m, direction: w.direction })
        }
        None => WitnessMode::Auto,
    };
    let ds = degeneration_side(&d)?;
    let fs = fibration_side(&f)?;
    let r = mirror::check_mirror_pair(&ds, &fs, &mode)?;
    Ok((Verdict::from_option(r.verdict), to_value(&r)))
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

/// Re-readable input files for one degree-two instance.
pub fn dht_instance_files(inst: &mirror::DhtInstance) -> crate::Result<(DegenerationSpec, FibrationSpec, WitnessSpec)> {
    let (deg, fib, _) = mirror::dht_sides(inst)?;
    let (psi1, psi2) = mirror::auto_factor_isometries(&deg, &fib)?.ok_or_else(|| Error::Precondition("no standard frames".into()))?;
    let d = DegenerationSpec {
        pair1: HomSpec::Model(inst.degeneration[0]),
        pair2: HomSpec::Model(inst.degeneration[1]),
        l: PolarisationSpec::Classes(ClassSpec::NsM(to_json_rows(&deg.l.generators()))),
    };
    let mut fibres = inst.split.side1.fibres.clone();
    fibres.extend(inst.split.side2.fibres.iter().cloned());
    let n1 = inst.split.side1.fibres.len();
    let f = FibrationSpec {
        config: FibreConfig::new(fibres),
        split: SplitSpec { side1: (0..n1).collect(), side2: (n1..n1 + inst.split.side2.fibres.len()).collect() },
        gamma: None,
    };
    let w = WitnessSpec { psi1, psi2, psihat: None, m: 1, direction: SplitDirection::FromDegeneration };
    Ok((d, f, w))
}

fn mirror_dht_suite(export: Option<&Path>) -> CmdResult {
    let results = mirror::dht_suite()?;
    if let Some(dir) = export {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
        for inst in mirror::dht_instances() {
            let (d, f, w) = dht_instance_files(&inst)?;
            let stem = file_stem(inst.name);
            for (suffix, v) in [("degeneration", to_value(&d)), ("fibration", to_value(&f)), ("witness", to_value(&w))] {
                let path = dir.join(format!("{stem}.{suffix}.json"));
                std::fs::write(&path, serde_json::to_string_pretty(&v).expect("serializes") + "\n").map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            }
        }
    }
    let verified = results.iter().filter(|r| r.verified).count();
    let verdict = if verified == results.len() { Verdict::Verified } else { Verdict::Refuted };
    let out = json!({ "verified": format!("{verified}/{}", results.len()), "instances": results });
    Ok((verdict, out))
}

fn selftest(a: &SelftestArgs) -> CmdResult {
    let names = properties::select(&a.properties);
    let mut outcomes = Vec::new();
    for n in &names {
        let o = properties::run_property(n, a.seed, a.cases).ok_or_else(|| Failure::Usage(format!("unknown property `{n}`")))?;
        outcomes.push(o);
    }
    let all = outcomes.iter().all(|o| o.passed);
    let out = json!({ "seed": a.seed, "cases": a.cases, "properties": outcomes });
    Ok((if all { Verdict::Verified } else { Verdict::Refuted }, out))
}

// ---------------------------------------------------------------------------
// Text rendering

/// Renders a report as `key: value` lines, with a table for the degree-two suite.
pub fn render_text(r: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "verdict: {}", serde_json::to_value(r.verdict).expect("serializes").as_str().unwrap_or("?"));
    let _ = writeln!(s, "command: {}", r.command.join(" "));
    let _ = writeln!(s, "tool_version: {}", r.tool_version);
    let _ = writeln!(s, "timing_ms: {}", r.timing_ms);
    for (k, v) in &r.inputs {
        let _ = writeln!(s, "input: {k} sha256={v}");
    }
    if let Some(rows) = r.result.get("instances").and_then(Value::as_array) {
        let _ = writeln!(s, "{:<14} {:<10} {:<10} {:<10} {:<8} {:<6} {:<8} verified", "instance", "expected", "fibres", "degen", "euler", "degree", "mw_tors");
        for row in rows {
            let g = |k: &str| row.get(k).map(scalar).unwrap_or_default();
            let _ = writeln!(
                s,
                "{:<14} {:<10} {:<10} {:<10} {:<8} {:<6} {:<8} {}",
                g("name"),
                g("expected_root_type"),
                g("component_root_type"),
                g("degeneration_root_type"),
                g("euler"),
                g("degree"),
                g("mw_torsion"),
                g("verified")
            );
        }
        if let Some(v) = r.result.get("verified") {
            let _ = writeln!(s, "verified: {}", scalar(v));
        }
        return s;
    }
    flatten("", &r.result, &mut s);
    s
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(x) => x.clone(),
        Value::Array(a) if a.iter().all(|x| !x.is_object() && !x.is_array()) => {
            format!("[{}]", a.iter().map(scalar).collect::<Vec<_>>().join(","))
        }
        other => other.to_string(),
    }
}

fn flatten(prefix: &str, v: &Value, s: &mut String) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&p, x, s);
            }
        }
        Value::Array(a) if a.iter().any(|x| x.is_object()) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), x, s);
            }
        }
        other => {
            let _ = writeln!(s, "{prefix}: {}", scalar(other));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_64() {
        assert_eq!(run(&["lattice"]).code, EXIT_USAGE);
        assert_eq!(run(&["frobnicate"]).code, EXIT_USAGE);
        assert_eq!(run(&["lattice", "info", "--name", "Q7"]).code, EXIT_USAGE);
        assert_eq!(run(&["--help"]).code, 0);
        assert_eq!(run(&["--version"]).code, 0);
    }

    #[test]
    fn lattice_info_report() {
        let o = run(&["lattice", "info", "--name", "H+E8+E8"]);
        assert_eq!(o.code, 0);
        let r = o.report.unwrap();
        assert_eq!(r.schema, SCHEMA_VERSION);
        assert_eq!(r.result["rank"], 18);
        assert_eq!(r.result["signature"]["pos"], 1);
        assert_eq!(r.result["signature"]["neg"], 17);
        assert_eq!(r.result["even"], true);
        assert_eq!(r.result["unimodular"], true);
        let e8 = run(&["lattice", "info", "--name", "E8"]).report.unwrap();
        assert_eq!(e8.result["root_system"], "E8");
    }

    #[test]
    fn text_format_flattens() {
        let o = run(&["--format", "text", "lattice", "info", "--name", "A2"]);
        assert_eq!(o.code, 0);
        assert!(o.stdout.contains("verdict: verified"));
        assert!(o.stdout.contains("signature.neg: 2"));
        assert!(o.stdout.contains("discriminant: [3]"));
    }

    #[test]
    fn hom_specs_parse() {
        let w: HomSpec = serde_json::from_str(r#"{"words": [[0,1],[3,1],[6,1]]}"#).unwrap();
        assert!(matches!(w, HomSpec::Words { .. }));
        let m: HomSpec = serde_json::from_str(r#"{"model": "Chain", "n": 5}"#).unwrap();
        assert!(matches!(m, HomSpec::Model(QdpModel::Chain { n: 5 })));
        let q: HomSpec = serde_json::from_str(r#"{"model": "Quadric"}"#).unwrap();
        assert!(matches!(q, HomSpec::Model(QdpModel::Quadric)));
        let p: HomSpec = serde_json::from_str(r#"{"ns": "I(1,0)", "k": [-3]}"#).unwrap();
        assert!(matches!(p, HomSpec::Pair { .. }));
        assert!(matches!(serde_json::from_str::<HomSpec>(r#"{"model": "Chain", "n": 1}"#).unwrap().build(), Err(Error::Input(_))));
    }
}
