use std::io::Read;
use std::path::PathBuf;

use nmfkit::exact::{exact_search, rank_plus_with, ExactConfig, RankAttempt};
use nmfkit::geometry::{
    hexagon_factor_product, hexagon_factors, hexagon_matrix, hexagon_matrix_inf, npp_extract,
    regular_polygon, slack_matrix, verify_lift, PolytopeH,
};
use nmfkit::hsi::{self, generate_synthetic, read_cube, score, unmix, write_cube, UnmixOptions};
use nmfkit::io::{parse_any, points_csv, read_matrix, to_csv};
use nmfkit::matrix::{numeric_rank, DEFAULT_RANK_TOL};
use nmfkit::nmf::{factorize, Init, NmfConfig, NmfModel};
use nmfkit::separable::separable_nmf;
use nmfkit::DenseMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::args::*;
use crate::error::{CliError, Status};
use crate::manifest::{Sink, STDIN_COPY};

type Outcome = Result<Status, CliError>;

/// Reads the matrix argument; standard input is copied into the sink so the
/// run can be replayed.
fn load_matrix(input: &Option<PathBuf>, sink: &mut Sink) -> Result<DenseMatrix, CliError> {
    match input {
        Some(path) => Ok(read_matrix(path)?),
        None => {
            let mut text = String::new();
            std::io::stdin()
                .read_to_string(&mut text)
                .map_err(|e| CliError::Usage(format!("standard input: {e}")))?;
            sink.write(STDIN_COPY, &text)?;
            Ok(parse_any(&text)?)
        }
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Prints the result JSON and stores it as `result.json`.
fn emit<T: Serialize>(sink: &mut Sink, value: &T) -> Result<(), CliError> {
    let text = json(value);
    print!("{text}");
    sink.write("result.json", &text)
}

fn trace_csv(trace: &[(usize, f64)]) -> String {
    let mut s = String::from("iteration,relative_residual\n");
    for (i, r) in trace {
        s.push_str(&format!("{i},{r:e}\n"));
    }
    s
}

#[derive(Serialize)]
struct FactorizeReport {
    algorithm: String,
    r: usize,
    seed: u64,
    iterations: usize,
    relative_residual: f64,
    converged: bool,
    restarts: usize,
    best_restart: usize,
    trace: Vec<(usize, f64)>,
}

pub fn factorize_cmd(a: &FactorizeArgs, sink: &mut Sink) -> Outcome {
    let m = load_matrix(&a.input, sink)?;
    if a.restarts == 0 {
        return Err(CliError::Usage("--restarts must be >= 1".into()));
    }
    let init = if a.spa_init { Init::SpaInit } else { Init::RandomScaled };
    let base = NmfConfig::new(a.rank, a.alg).with_iters(a.iters).with_tol(a.tol).with_init(init);
    base.validate(&m)?;
    // Restart i uses seed + i; ties go to the lowest restart.
    let models: Vec<NmfModel> = (0..a.restarts)
        .into_par_iter()
        .map(|i| factorize(&m, &base.clone().with_seed(a.seed.wrapping_add(i as u64))))
        .collect::<nmfkit::Result<_>>()?;
    let (best_restart, best) = models
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.relative_residual().total_cmp(&y.1.relative_residual()))
        .expect("at least one restart");
    sink.write("U.csv", to_csv(&best.u))?;
    sink.write("V.csv", to_csv(&best.v))?;
    sink.write("trace.csv", trace_csv(&best.trace))?;
    emit(
        sink,
        &FactorizeReport {
            algorithm: a.alg.to_string(),
            r: a.rank,
            seed: a.seed,
            iterations: best.iterations(),
            relative_residual: best.relative_residual(),
            converged: best.converged,
            restarts: a.restarts,
            best_restart,
            trace: best.trace.clone(),
        },
    )?;
    Ok(if best.converged { Status::Ok } else { Status::NonConvergence })
}

#[derive(Serialize)]
struct SingleRankReport {
    lower: usize,
    r: usize,
    found: bool,
    success_restart: Option<usize>,
    per_r: Vec<RankAttempt>,
    seed: u64,
}

pub fn rankplus_cmd(a: &RankplusArgs, sink: &mut Sink) -> Outcome {
    let m = load_matrix(&a.input, sink)?;
    let mut cfg = ExactConfig::new(a.restarts, a.seed).with_tol(a.tol).with_strategy(a.strategy);
    cfg.extrapolate = a.extrapolate;
    if let Some(r) = a.only {
        let found = exact_search(&m, r, &cfg)?;
        if let Some(w) = &found.witness {
            sink.write("U.csv", to_csv(&w.u))?;
            sink.write("V.csv", to_csv(&w.v))?;
        }
        let ok = found.witness.is_some();
        emit(
            sink,
            &SingleRankReport {
                lower: numeric_rank(&m, DEFAULT_RANK_TOL)?,
                r,
                found: ok,
                success_restart: found.success_index,
                per_r: vec![RankAttempt {
                    r,
                    restarts: found.attempts,
                    best_residual: found.best_residual,
                    found: ok,
                }],
                seed: a.seed,
            },
        )?;
        return Ok(if ok { Status::Ok } else { Status::NonConvergence });
    }
    let rmax = a.rmax.unwrap_or(m.rows().min(m.cols()));
    let est = rank_plus_with(&m, rmax, &cfg)?;
    if let Some(w) = &est.witness {
        sink.write("U.csv", to_csv(&w.u))?;
        sink.write("V.csv", to_csv(&w.v))?;
    }
    let text = est.to_json() + "\n";
    print!("{text}");
    sink.write("result.json", &text)?;
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct SeparableReport {
    #[serde(rename = "K")]
    k: Vec<usize>,
    residual: f64,
    r: usize,
    method: String,
}

pub fn separable_cmd(a: &SeparableArgs, sink: &mut Sink) -> Outcome {
    let m = load_matrix(&a.input, sink)?;
    let res = separable_nmf(&m, a.rank, a.method, a.denoise, a.refine)?;
    sink.write("V.csv", to_csv(&res.v))?;
    emit(
        sink,
        &SeparableReport {
            k: res.k,
            residual: res.residual,
            r: res.r,
            method: a.method.to_string(),
        },
    )?;
    Ok(Status::Ok)
}

fn load_polytope(src: &PolytopeSource) -> Result<PolytopeH, CliError> {
    match (src.polygon, &src.polytope) {
        (Some(n), None) => Ok(regular_polygon(n)?),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            Ok(PolytopeH::from_json(&text)?)
        }
        _ => Err(CliError::Usage("give exactly one of --polygon or --polytope".into())),
    }
}

#[derive(Serialize)]
struct SlackReport {
    facets: usize,
    vertices: usize,
    numeric_rank: usize,
}

pub fn slack_cmd(a: &SlackArgs, sink: &mut Sink) -> Outcome {
    let p = load_polytope(&a.source)?;
    let s = slack_matrix(&p)?;
    let csv = to_csv(&s);
    print!("{csv}");
    sink.write("slack.csv", &csv)?;
    sink.write("polytope.json", p.to_json())?;
    sink.write(
        "result.json",
        json(&SlackReport {
            facets: s.rows(),
            vertices: s.cols(),
            numeric_rank: numeric_rank(&s, DEFAULT_RANK_TOL)?,
        }),
    )?;
    Ok(Status::Ok)
}

pub fn lift_cmd(a: &LiftArgs, sink: &mut Sink) -> Outcome {
    let p = load_polytope(&a.source)?;
    let u = read_matrix(&a.u)?;
    let v = read_matrix(&a.v)?;
    let rep = verify_lift(&p, &u, &v)?;
    emit(sink, &rep)?;
    Ok(if rep.passed() { Status::Ok } else { Status::VerificationFailed })
}

#[derive(Serialize)]
struct HexagonReport {
    a: Option<f64>,
    numeric_rank: usize,
    /// For the limit matrix: whether the printed integer factors reproduce it.
    factors_exact: Option<bool>,
    factor_rank: Option<usize>,
}

pub fn hexagon_cmd(a: &HexagonArgs, sink: &mut Sink) -> Outcome {
    let m = match (a.a, a.inf) {
        (Some(x), false) => hexagon_matrix(x)?,
        (None, true) => hexagon_matrix_inf(),
        _ => return Err(CliError::Usage("give exactly one of --a or --inf".into())),
    };
    let csv = to_csv(&m);
    print!("{csv}");
    sink.write("M.csv", &csv)?;
    let mut report = HexagonReport {
        a: a.a,
        numeric_rank: numeric_rank(&m, DEFAULT_RANK_TOL)?,
        factors_exact: None,
        factor_rank: None,
    };
    let mut status = Status::Ok;
    if a.inf {
        let (u, v) = hexagon_factors();
        sink.write("U.csv", to_csv(&u))?;
        sink.write("V.csv", to_csv(&v))?;
        report.factor_rank = Some(numeric_rank(&u, DEFAULT_RANK_TOL)?);
        if a.verify {
            let prod = hexagon_factor_product();
            let exact = (0..6).all(|i| (0..6).all(|j| prod[i][j] as f64 == m[(i, j)]));
            report.factors_exact = Some(exact);
            if !exact {
                status = Status::VerificationFailed;
            }
        }
    }
    sink.write("result.json", json(&report))?;
    if a.verify {
        eprint!("{}", json(&report));
    }
    Ok(status)
}

#[derive(Serialize)]
struct NppReport {
    ratio: f64,
    inner_circumradius: f64,
    outer_circumradius: f64,
    outer_vertices: usize,
    inner_hull_vertices: usize,
    outer_facets: Vec<usize>,
    nested: bool,
}

pub fn npp_cmd(a: &NppArgs, sink: &mut Sink) -> Outcome {
    let m = load_matrix(&a.input, sink)?;
    let inst = npp_extract(&m)?;
    sink.write("inner.csv", points_csv(&inst.inner))?;
    sink.write("outer.csv", points_csv(&inst.outer))?;
    let nested = inst.nested(1e-9);
    emit(
        sink,
        &NppReport {
            ratio: inst.ratio(),
            inner_circumradius: inst.inner_circumradius(),
            outer_circumradius: inst.outer_circumradius(),
            outer_vertices: inst.outer.len(),
            inner_hull_vertices: inst.inner_hull().len(),
            outer_facets: inst.outer_facets.clone(),
            nested,
        },
    )?;
    Ok(if nested { Status::Ok } else { Status::VerificationFailed })
}

#[derive(Serialize)]
struct HsiGenReport {
    p: usize,
    width: usize,
    height: usize,
    r: usize,
    snr_db: Option<f64>,
    empirical_snr_db: Option<f64>,
    pure_pixels: Option<Vec<usize>>,
    seed: u64,
}

pub fn hsi_gen_cmd(a: &HsiGenArgs, sink: &mut Sink) -> Outcome {
    let (cube, truth) = generate_synthetic(a.p, a.width, a.height, a.rank, a.pure, a.snr, a.seed)?;
    write_cube(&a.out_dir, &cube, Some(&truth))?;
    for name in [hsi::CUBE_HEADER, hsi::CUBE_DATA, hsi::TRUTH_U, hsi::TRUTH_V] {
        sink.record(name)?;
    }
    let empirical = match a.snr {
        Some(_) => Some(truth.empirical_snr_db(&cube)?),
        None => None,
    };
    emit(
        sink,
        &HsiGenReport {
            p: a.p,
            width: a.width,
            height: a.height,
            r: a.rank,
            snr_db: a.snr,
            empirical_snr_db: empirical,
            pure_pixels: truth.pure_pixels.clone(),
            seed: a.seed,
        },
    )?;
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct HsiUnmixReport {
    #[serde(rename = "K")]
    k: Vec<usize>,
    residual: f64,
    r: usize,
    method: String,
    refine: bool,
    score: Option<hsi::Score>,
}

pub fn hsi_unmix_cmd(a: &HsiUnmixArgs, sink: &mut Sink) -> Outcome {
    let (cube, truth) = read_cube(&a.cube)?;
    let opts = UnmixOptions::new(a.method).with_denoise(a.denoise).with_refine(a.refine);
    let res = unmix(&cube, a.rank, &opts)?;
    let sc = match &truth {
        Some(t) if t.rank() == a.rank => Some(score(&res, t)?),
        _ => None,
    };
    sink.write("U.csv", to_csv(&res.u))?;
    sink.write("V.csv", to_csv(&res.v))?;
    emit(
        sink,
        &HsiUnmixReport {
            k: res.k,
            residual: res.residual,
            r: res.r,
            method: a.method.to_string(),
            refine: a.refine,
            score: sc,
        },
    )?;
    Ok(Status::Ok)
}
