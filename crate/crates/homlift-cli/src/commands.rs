//! One function per CLI command, all returning a report plus the process
//! exit code: 0 for a positive verdict, 2 when an obstruction was found
//! (a result, not a failure), 3 when a provider table ran out, 1 for input
//! or internal errors (raised as `Err`).

use std::path::Path;

use homlift::bar::{BarCtx, TermView};
use homlift::coalg::{check_morphism, validate_structure, CellMap};
use homlift::cyl::{homotopy, HomotopyOutcome};
use homlift::dercx::terms_of_grade;
use homlift::error::{Error, Result};
use homlift::solver::{gamma_cohomology, realize, RealizeOutcome};

use crate::cache::{basis_key, compute_cells, BasisCache};
use crate::manifest::{parse_doc, resolve, Problem};
use crate::report::{
    input_hash, obstruction_line, stage_lines, term_lines, BasisLine, BlockLine, LabelLine,
    Report, ResidualLine, TermLine,
};
use crate::selftest;

pub struct Invocation<'a> {
    pub command: &'a str,
    pub manifest_bytes: &'a str,
    pub grade_override: Option<u32>,
    pub arity_override: Option<u8>,
    pub cache_dir: Option<&'a Path>,
}

/// Degree window wide enough for every term the cutoffs allow.
const DEG_LO: i64 = -(1 << 40);
const DEG_HI: i64 = 1 << 40;

fn base_report(inv: &Invocation, p: &Problem, verdict: &str) -> Report {
    let flags = format!(
        "command={};grade_cutoff={};arity_cutoff={}",
        inv.command, p.grade_cutoff, p.bar.arity_cutoff
    );
    let mut r = Report::new(
        inv.command,
        input_hash(inv.manifest_bytes.as_bytes(), &flags),
        verdict,
    );
    r.field = Some(p.field.to_string());
    r.operad = Some(p.operad_name.clone());
    r.grade_cutoff = Some(p.grade_cutoff);
    r.arity_cutoff = Some(p.bar.arity_cutoff);
    r
}

pub fn run(inv: &Invocation) -> Result<(Report, i32)> {
    if inv.command == "selftest" {
        return run_selftest(inv);
    }
    let doc = parse_doc(inv.manifest_bytes)?;
    let p = resolve(&doc, inv.grade_override, inv.arity_override)?;
    match inv.command {
        "validate" => run_validate(inv, &p),
        "realize" => run_realize(inv, &p),
        "homotopy" => run_homotopy(inv, &p),
        "gamma" => run_gamma(inv, &p),
        "bar-basis" => run_bar_basis(inv, &p),
        other => Err(Error::input(format!("unknown command {other:?}"))),
    }
}

/// All term cells the truncation sees, for residual checks: every grade the
/// solvers consult, all degrees.
fn truncated_terms(bar: &BarCtx, degs: &[i64], grade_cutoff: u32) -> Result<Vec<homlift::tree::Node>> {
    let mut out = Vec::new();
    for g in 1..=grade_cutoff + 1 {
        out.extend(terms_of_grade(bar, degs, g, DEG_LO, DEG_HI)?);
    }
    Ok(out)
}

fn run_validate(inv: &Invocation, p: &Problem) -> Result<(Report, i32)> {
    let mut residuals = Vec::new();
    let a_degs = p.source.degrees();
    let view_a = TermView {
        bar: &p.bar,
        leaf_degrees: &a_degs,
    };
    let terms_a = truncated_terms(&p.bar, &a_degs, p.grade_cutoff)?;
    let bad = validate_structure(&view_a, &p.alpha, &terms_a)?;
    residuals.push(ResidualLine {
        map: "alpha".to_string(),
        cells: residual_lines(&bad),
    });
    if let (Some(t), Some(beta)) = (&p.target, &p.beta) {
        let b_degs = t.degrees();
        let view_b = TermView {
            bar: &p.bar,
            leaf_degrees: &b_degs,
        };
        let terms_b = truncated_terms(&p.bar, &b_degs, p.grade_cutoff)?;
        let bad = validate_structure(&view_b, beta, &terms_b)?;
        residuals.push(ResidualLine {
            map: "beta".to_string(),
            cells: residual_lines(&bad),
        });
        if p.f0.is_some() {
            let (f_zero, f_one) = p.morphisms()?;
            let checks: &[(&str, &CellMap)] = if p.f_one_comps.is_empty() && p.f_zero_comps.is_empty()
            {
                &[("morphism", &f_zero)]
            } else {
                &[("f_zero", &f_zero), ("f_one", &f_one)]
            };
            for (name, fm) in checks {
                fm.validate_against(&view_a, &p.source, t, name)?;
                let bad = check_morphism(&view_a, &view_b, &p.alpha, beta, fm, &terms_a)?;
                residuals.push(ResidualLine {
                    map: name.to_string(),
                    cells: residual_lines(&bad),
                });
            }
        }
    }
    let clean = residuals.iter().all(|r| r.cells.is_empty());
    let verdict = if clean { "VALID" } else { "INVALID" };
    let mut rep = base_report(inv, p, verdict);
    rep.residuals = Some(residuals);
    Ok((rep, if clean { 0 } else { 2 }))
}

fn residual_lines(
    bad: &std::collections::BTreeMap<homlift::tree::Node, homlift::chain::Chain<u32>>,
) -> Vec<TermLine> {
    bad.iter()
        .map(|(t, ch)| {
            let vals: Vec<(u32, homlift::field::Scalar)> =
                ch.iter().map(|(i, v)| (*i, v.clone())).collect();
            crate::report::term_line(t, &vals)
        })
        .collect()
}

fn run_realize(inv: &Invocation, p: &Problem) -> Result<(Report, i32)> {
    let (target, beta, f0) = p.target_and_beta()?;
    let outcome = realize(
        &p.bar,
        &p.source,
        target,
        &p.alpha,
        beta,
        f0,
        p.grade_cutoff,
        None,
    )?;
    match outcome {
        RealizeOutcome::Realized { f, stages } => {
            let mut rep = base_report(inv, p, "REALIZED");
            rep.stages = Some(stage_lines(&stages));
            rep.w0 = Some(matrix_lines(&f.w0));
            rep.components = Some(term_lines(&f.comps));
            Ok((rep, 0))
        }
        RealizeOutcome::Obstructed { class, stages } => {
            let mut rep = base_report(inv, p, "OBSTRUCTED");
            rep.stages = Some(stage_lines(&stages));
            rep.obstruction = Some(obstruction_line(&class));
            Ok((rep, 2))
        }
    }
}

fn run_homotopy(inv: &Invocation, p: &Problem) -> Result<(Report, i32)> {
    let (target, beta, _) = p.target_and_beta()?;
    let (f_zero, f_one) = p.morphisms()?;
    let outcome = homotopy(
        &p.bar,
        &p.source,
        target,
        &p.alpha,
        beta,
        &f_zero,
        &f_one,
        p.interval.as_ref(),
        p.diagonal.as_ref(),
        p.grade_cutoff,
    )?;
    match outcome {
        HomotopyOutcome::Homotopic { f01, stages } => {
            let mut rep = base_report(inv, p, "HOMOTOPIC");
            rep.stages = Some(stage_lines(&stages));
            rep.w0 = Some(matrix_lines(&f01.w0));
            rep.components = Some(term_lines(&f01.comps));
            Ok((rep, 0))
        }
        HomotopyOutcome::Obstructed { class, stages } => {
            let mut rep = base_report(inv, p, "OBSTRUCTED");
            rep.stages = Some(stage_lines(&stages));
            rep.obstruction = Some(obstruction_line(&class));
            Ok((rep, 2))
        }
        HomotopyOutcome::InsufficientProvider { missing } => {
            let mut rep = base_report(inv, p, "INSUFFICIENT_PROVIDER");
            rep.missing = Some(missing);
            Ok((rep, 3))
        }
    }
}

fn run_gamma(inv: &Invocation, p: &Problem) -> Result<(Report, i32)> {
    let (target, beta, f0) = p.target_and_beta()?;
    let blocks = gamma_cohomology(
        &p.bar,
        &p.source,
        target,
        &p.alpha,
        beta,
        f0,
        p.grade_cutoff,
    )?;
    let mut rep = base_report(inv, p, "VALID");
    rep.blocks = Some(
        blocks
            .iter()
            .map(|b| BlockLine {
                stage: b.stage,
                h1_kernel: b.h1.dim_kernel,
                h1_image: b.h1.dim_image,
                h1_quotient: b.h1.dim_quotient,
                h1_mid: b.h1_mid,
                h0_kernel: b.h0.dim_kernel,
                h0_image: b.h0.dim_image,
                h0_quotient: b.h0.dim_quotient,
                h0_mid: b.h0_mid,
            })
            .collect(),
    );
    Ok((rep, 0))
}

fn run_bar_basis(inv: &Invocation, p: &Problem) -> Result<(Report, i32)> {
    let cache = match inv.cache_dir {
        Some(dir) => Some(BasisCache::new(
            dir,
            basis_key(&p.bar.operad, p.bar.arity_cutoff, p.bar.e_bound),
        )?),
        None => None,
    };
    let mut basis = Vec::new();
    for arity in 1..=p.bar.arity_cutoff {
        for grade in 0..=p.grade_cutoff {
            let cells = match &cache {
                Some(c) => c.cells(&p.bar, arity, grade)?,
                None => compute_cells(&p.bar, arity, grade)?,
            };
            if cells.is_empty() {
                continue;
            }
            basis.push(BasisLine {
                arity,
                grade,
                count: cells.len(),
                cells: cells.iter().map(crate::report::cell_expr).collect(),
            });
        }
    }
    let mut labels = Vec::new();
    for arity in 2..=p.bar.arity_cutoff {
        for id in 0..p.bar.label_count(arity) as u32 {
            let q = p.bar.label(arity, id);
            labels.push(LabelLine {
                arity,
                id,
                operation: q.p,
                tuple: q.e.0.iter().map(|perm| perm.0.clone()).collect(),
                degree: p.bar.suspended_degree(arity, id),
            });
        }
    }
    let mut rep = base_report(inv, p, "VALID");
    rep.basis = Some(basis);
    rep.labels = Some(labels);
    Ok((rep, 0))
}

fn run_selftest(inv: &Invocation) -> Result<(Report, i32)> {
    let checks = selftest::run();
    let all_green = checks.iter().all(|c| c.passed);
    let flags = format!("command={}", inv.command);
    let mut rep = Report::new(
        inv.command,
        input_hash(inv.manifest_bytes.as_bytes(), &flags),
        if all_green { "VALID" } else { "INVALID" },
    );
    rep.checks = Some(checks);
    // a failing selftest is an internal error, not a mathematical verdict
    Ok((rep, if all_green { 0 } else { 1 }))
}

fn matrix_lines(m: &homlift::linalg::SparseMatrix) -> Vec<(usize, usize, String)> {
    m.iter()
        .map(|((r, c), v)| (*r, *c, v.to_string()))
        .collect()
}
