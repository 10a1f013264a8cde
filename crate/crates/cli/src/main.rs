//! `o3tensor` command-line front end.
//!
//! Exit codes: 0 ok, 1 verification failure, 2 usage error.

mod num;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;
use serde_json::{json, Value};

use o3tensor::cg::wigner_3j;
use o3tensor::harness::equivariance_report;
use o3tensor::o3::{wigner_d, EulerAngles};
use o3tensor::reduce::{reduce, IndexFormula};
use o3tensor::s2grid::{make_grid, S2Signal};
use o3tensor::sh::{sh_dim, spherical_harmonics_at, Normalization};
use o3tensor::tensor_product::{Linear, TensorProductDoc, TensorProductSpec};
use o3tensor::Irreps;

#[derive(Parser)]
#[command(name = "o3tensor", version, about = "O(3)-equivariant tensor algebra")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Tolerance for verification commands.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose a tensor with index symmetries into irreps.
    Reduce {
        formula: String,
        /// Irreps of an index, e.g. `i=1o`. Repeatable.
        #[arg(short = 'i', long = "index", required = true)]
        index: Vec<String>,
        /// Also print the rows of the change of basis Q.
        #[arg(long)]
        basis: bool,
    },
    /// Dense Clebsch-Gordan tensor, one `i j k value` line per entry.
    Cg { l1: u32, l2: u32, l3: u32 },
    /// Spherical harmonics at one point.
    Sh {
        #[arg(long)]
        lmax: u32,
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long)]
        no_normalize: bool,
        #[arg(long, default_value = "norm")]
        normalization: String,
    },
    /// Real Wigner D matrix for Y-X-Y Euler angles.
    Wigner {
        #[arg(long)]
        l: u32,
        #[arg(long, allow_hyphen_values = true)]
        angles: String,
    },
    /// Paths and weight count of a tensor product spec.
    TpInfo { spec: PathBuf },
    /// Equivariance and bilinearity checks of a tensor product spec.
    TpCheck {
        spec: PathBuf,
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
    /// Sphere-grid transforms.
    S2 {
        #[command(subcommand)]
        command: S2Command,
    },
    /// Randomized equivariance check of a tensor product, linear map or
    /// spherical harmonics described in JSON.
    CheckEquivariance {
        spec: PathBuf,
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
}

#[derive(Subcommand)]
enum S2Command {
    /// Random band-limited signal -> grid -> coefficients.
    Roundtrip {
        #[arg(long = "L")]
        lmax: u32,
        #[arg(long)]
        res_beta: Option<usize>,
        #[arg(long)]
        res_alpha: Option<usize>,
    },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum CheckSpec {
    TensorProduct(TensorProductDoc),
    Linear {
        irreps_in: Irreps,
        irreps_out: Irreps,
    },
    SphericalHarmonics {
        lmax: u32,
        #[serde(default = "yes")]
        normalize: bool,
        #[serde(default)]
        normalization: Normalization,
    },
}

fn yes() -> bool {
    true
}

enum Failure {
    Usage(String),
    Verification(String),
}

impl From<o3tensor::Error> for Failure {
    fn from(e: o3tensor::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    let c = &cli.common;
    match &cli.command {
        Command::Reduce { formula, index, basis } => cmd_reduce(c, formula, index, *basis),
        Command::Cg { l1, l2, l3 } => cmd_cg(c, *l1, *l2, *l3),
        Command::Sh {
            lmax,
            point,
            no_normalize,
            normalization,
        } => cmd_sh(c, *lmax, point, !no_normalize, normalization),
        Command::Wigner { l, angles } => cmd_wigner(c, *l, angles),
        Command::TpInfo { spec } => cmd_tp_info(c, spec),
        Command::TpCheck { spec, trials } => cmd_tp_check(c, spec, *trials),
        Command::S2 {
            command: S2Command::Roundtrip {
                lmax,
                res_beta,
                res_alpha,
            },
        } => cmd_s2_roundtrip(c, *lmax, *res_beta, *res_alpha),
        Command::CheckEquivariance { spec, trials } => cmd_check_equivariance(c, spec, *trials),
    }
}

fn emit(c: &Common, value: Value, text: impl FnOnce() -> String) {
    if c.json {
        println!("{}", serde_json::to_string_pretty(&value).expect("serializable"));
    } else {
        print!("{}", text());
    }
}

fn cleaned(values: &[f64]) -> Vec<f64> {
    values.iter().map(|&v| num::clean(v)).collect()
}

fn parse_reals<const N: usize>(s: &str, what: &str) -> Result<[f64; N], Failure> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(Failure::Usage(format!("{what} needs {N} comma-separated numbers, got `{s}`")));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p
            .parse()
            .map_err(|_| Failure::Usage(format!("`{p}` in {what} is not a number")))?;
    }
    Ok(out)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn cmd_reduce(c: &Common, formula: &str, index: &[String], basis: bool) -> Outcome {
    let f = IndexFormula::parse(formula)?;
    let mut assignments = Vec::new();
    for a in index {
        let (letter, irreps) = a
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("index assignment `{a}` is not of the form i=1o")))?;
        let mut chars = letter.trim().chars();
        let (Some(letter), None) = (chars.next(), chars.next()) else {
            return Err(Failure::Usage(format!("`{letter}` is not a single index letter")));
        };
        assignments.push((letter, irreps.parse::<Irreps>()?));
    }
    let r = reduce(&f, &assignments)?;
    let rows: Vec<Vec<f64>> = (0..r.q.nrows())
        .map(|i| cleaned(&r.q.row(i).iter().copied().collect::<Vec<_>>()))
        .collect();
    let mut value = json!({
        "formula": f.to_string(),
        "index_irreps": r.index_irreps.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "irreps_out": r.irreps_out.to_string(),
        "dim": r.irreps_out.dim(),
    });
    if basis {
        value["basis"] = json!(rows);
    }
    emit(c, value, || {
        let mut s = format!("{}\n", r.irreps_out);
        if basis {
            for row in &rows {
                s += &num::join(row);
                s.push('\n');
            }
        }
        s
    });
    Ok(())
}

fn cmd_cg(c: &Common, l1: u32, l2: u32, l3: u32) -> Outcome {
    let t = wigner_3j(l1, l2, l3)?;
    let (n1, n2, n3) = t.shape();
    let mut entries = Vec::new();
    for i in 0..n1 {
        for j in 0..n2 {
            for k in 0..n3 {
                entries.push((i, j, k, num::clean(t.get(i, j, k))));
            }
        }
    }
    emit(
        c,
        json!({
            "l1": l1, "l2": l2, "l3": l3,
            "shape": [n1, n2, n3],
            "values": entries.iter().map(|e| e.3).collect::<Vec<_>>(),
        }),
        || {
            entries
                .iter()
                .map(|(i, j, k, v)| format!("{i} {j} {k} {}\n", num::fmt(*v)))
                .collect()
        },
    );
    Ok(())
}

fn cmd_sh(c: &Common, lmax: u32, point: &str, normalize: bool, normalization: &str) -> Outcome {
    let normalization: Normalization = normalization.parse()?;
    let [x, y, z] = parse_reals::<3>(point, "--point")?;
    let values = cleaned(&spherical_harmonics_at(lmax, &Vector3::new(x, y, z), normalize, normalization)?);
    let blocks: Vec<Vec<f64>> = (0..=lmax)
        .map(|l| values[(l * l) as usize..sh_dim(l)].to_vec())
        .collect();
    emit(
        c,
        json!({
            "lmax": lmax,
            "point": [x, y, z],
            "normalize": normalize,
            "normalization": normalization,
            "values": values,
        }),
        || {
            blocks
                .iter()
                .enumerate()
                .map(|(l, b)| format!("l={l}: {}\n", num::join(b)))
                .collect()
        },
    );
    Ok(())
}

fn cmd_wigner(c: &Common, l: u32, angles: &str) -> Outcome {
    let [a, b, g] = parse_reals::<3>(angles, "--angles")?;
    let d = wigner_d(l, &EulerAngles::new(a, b, g));
    let rows: Vec<Vec<f64>> = (0..d.nrows())
        .map(|i| cleaned(&d.row(i).iter().copied().collect::<Vec<_>>()))
        .collect();
    emit(c, json!({ "l": l, "angles": [a, b, g], "matrix": rows }), || {
        rows.iter().map(|r| num::join(r) + "\n").collect()
    });
    Ok(())
}

fn load_tp(path: &Path) -> Result<TensorProductSpec, Failure> {
    let doc: TensorProductDoc = read_json(path)?;
    Ok(doc.build()?)
}

fn cmd_tp_info(c: &Common, path: &Path) -> Outcome {
    let tp = load_tp(path)?;
    let ins = tp.instructions();
    let rows: Vec<Value> = tp
        .paths()
        .iter()
        .zip(&ins)
        .map(|(p, i)| {
            json!({
                "i_in1": i.i_in1, "i_in2": i.i_in2, "i_out": i.i_out,
                "mode": i.mode, "has_weight": i.has_weight,
                "path_weight": p.path_weight,
                "weights": p.weight_len,
                "path": format!("{} x {} -> {}",
                    tp.irreps_in1().0[i.i_in1], tp.irreps_in2().0[i.i_in2], tp.irreps_out().0[i.i_out]),
            })
        })
        .collect();
    emit(
        c,
        json!({
            "irreps_in1": tp.irreps_in1().to_string(),
            "irreps_in2": tp.irreps_in2().to_string(),
            "irreps_out": tp.irreps_out().to_string(),
            "paths": tp.paths().len(),
            "weights": tp.weight_numel(),
            "instructions": rows,
            "warnings": tp.warnings(),
        }),
        || {
            let mut s = format!("paths: {}, weights: {}\n", tp.paths().len(), tp.weight_numel());
            for (n, (p, i)) in tp.paths().iter().zip(&ins).enumerate() {
                s += &format!(
                    "{n}: {} x {} -> {} mode={} weights={} path_weight={}\n",
                    tp.irreps_in1().0[i.i_in1],
                    tp.irreps_in2().0[i.i_in2],
                    tp.irreps_out().0[i.i_out],
                    i.mode,
                    p.weight_len,
                    num::fmt(p.path_weight)
                );
            }
            for w in tp.warnings() {
                s += &format!("warning: {w}\n");
            }
            s
        },
    );
    Ok(())
}

fn cmd_tp_check(c: &Common, path: &Path, trials: usize) -> Outcome {
    let tp = load_tp(path)?;
    let tol = c.tol.unwrap_or(1e-9);
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let w = normal_vec(&mut rng, tp.weight_numel());
    let f = |x: &[Vec<f64>]| tp.evaluate(&w, &x[0], &x[1]);
    let ins = [tp.irreps_in1().clone(), tp.irreps_in2().clone()];
    let report = equivariance_report(f, &ins, tp.irreps_out(), trials, c.seed)?;

    // bilinearity in each argument for random coefficients
    let mut bilinear = 0.0f64;
    for _ in 0..trials.max(1) {
        let (x, x2) = (normal_vec(&mut rng, ins[0].dim()), normal_vec(&mut rng, ins[0].dim()));
        let (y, y2) = (normal_vec(&mut rng, ins[1].dim()), normal_vec(&mut rng, ins[1].dim()));
        let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        let mix = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(u, v)| a * u + b * v).collect::<Vec<_>>();
        let e = |u: &[f64], v: &[f64]| tp.evaluate(&w, u, v);
        let (fxy, fx2y, fxy2) = (e(&x, &y)?, e(&x2, &y)?, e(&x, &y2)?);
        let left = e(&mix(&x, &x2), &y)?;
        let right = e(&x, &mix(&y, &y2))?;
        for k in 0..left.len() {
            bilinear = bilinear
                .max((left[k] - a * fxy[k] - b * fx2y[k]).abs())
                .max((right[k] - a * fxy[k] - b * fxy2[k]).abs());
        }
    }
    let ok = report.max_residual <= tol && bilinear <= tol;
    emit(
        c,
        json!({
            "paths": tp.paths().len(),
            "weights": tp.weight_numel(),
            "trials": report.num_trials(),
            "tol": tol,
            "equivariance_residual": report.max_residual,
            "bilinearity_residual": bilinear,
            "passed": ok,
        }),
        || {
            format!(
                "paths: {}, weights: {}\nequivariance: {} ({} trials)\nbilinearity: {}\n{}\n",
                tp.paths().len(),
                tp.weight_numel(),
                num::fmt(report.max_residual),
                report.num_trials(),
                num::fmt(bilinear),
                if ok { "PASS" } else { "FAIL" }
            )
        },
    );
    if ok {
        Ok(())
    } else {
        Err(Failure::Verification(format!("tensor product residual above {tol:e}")))
    }
}

fn cmd_s2_roundtrip(c: &Common, lmax: u32, res_beta: Option<usize>, res_alpha: Option<usize>) -> Outcome {
    let rb = res_beta.unwrap_or(lmax as usize + 1);
    let ra = res_alpha.unwrap_or(2 * lmax as usize + 1);
    let grid = make_grid(rb, ra, lmax)?;
    let tol = c.tol.unwrap_or(1e-9);
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let signal = S2Signal::new(lmax, normal_vec(&mut rng, sh_dim(lmax)))?;
    let f = grid.to_grid(&signal)?;
    let back = grid.from_grid(&f, lmax)?;
    let err = back
        .coeffs
        .iter()
        .zip(&signal.coeffs)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let parseval = (grid.integrate(&f.component_mul(&f)) - signal.energy()).abs();
    let ok = err <= tol;
    emit(
        c,
        json!({
            "L": lmax, "res_beta": rb, "res_alpha": ra,
            "max_error": err,
            "parseval_residual": parseval,
            "passed": ok,
        }),
        || {
            format!(
                "grid: {rb} x {ra}, L = {lmax}\nmax round-trip error: {}\nParseval residual: {}\n",
                num::fmt(err),
                num::fmt(parseval)
            )
        },
    );
    if ok {
        Ok(())
    } else {
        Err(Failure::Verification(format!("round-trip error {err:e} above {tol:e}")))
    }
}

fn cmd_check_equivariance(c: &Common, path: &Path, trials: usize) -> Outcome {
    let spec: CheckSpec = read_json(path)?;
    let tol = c.tol.unwrap_or(1e-9);
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let (kind, report) = match spec {
        CheckSpec::TensorProduct(doc) => {
            let tp = doc.build()?;
            let w = normal_vec(&mut rng, tp.weight_numel());
            let f = |x: &[Vec<f64>]| tp.evaluate(&w, &x[0], &x[1]);
            let ins = [tp.irreps_in1().clone(), tp.irreps_in2().clone()];
            ("tensor_product", equivariance_report(f, &ins, tp.irreps_out(), trials, c.seed)?)
        }
        CheckSpec::Linear { irreps_in, irreps_out } => {
            let lin = Linear::new(&irreps_in, &irreps_out);
            let w = normal_vec(&mut rng, lin.weight_numel());
            let f = |x: &[Vec<f64>]| lin.evaluate(&w, &x[0]);
            ("linear", equivariance_report(f, std::slice::from_ref(&irreps_in), &irreps_out, trials, c.seed)?)
        }
        CheckSpec::SphericalHarmonics {
            lmax,
            normalize,
            normalization,
        } => {
            let f = |x: &[Vec<f64>]| {
                spherical_harmonics_at(lmax, &Vector3::new(x[0][0], x[0][1], x[0][2]), normalize, normalization)
            };
            let ins = ["1o".parse::<Irreps>()?];
            let out = Irreps::spherical_harmonics(lmax);
            ("spherical_harmonics", equivariance_report(f, &ins, &out, trials, c.seed)?)
        }
    };
    let ok = report.passed(tol);
    let worst = report.worst().map(|w| w.g.to_string());
    emit(
        c,
        json!({
            "kind": kind,
            "trials": report.num_trials(),
            "tol": tol,
            "max_residual": report.max_residual,
            "worst_element": worst,
            "passed": ok,
        }),
        || {
            let mut s = format!(
                "{kind}: max residual {} over {} trials\n",
                num::fmt(report.max_residual),
                report.num_trials()
            );
            if let Some(w) = &worst {
                s += &format!("worst element: {w}\n");
            }
            s += if ok { "PASS\n" } else { "FAIL\n" };
            s
        },
    );
    if ok {
        Ok(())
    } else {
        Err(Failure::Verification(format!(
            "residual {:e} above {tol:e}",
            report.max_residual
        )))
    }
}
