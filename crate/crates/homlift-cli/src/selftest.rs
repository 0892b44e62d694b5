//! Built-in invariant suite: fast re-checks of the identities the engine's
//! correctness rests on, runnable in the field without a test harness.



use homlift::bar::{differential, differential_chain, enumerate_cells, BarCtx, BarView, TermView};
use homlift::chain::{chain_add, chain_add_all, chain_is_zero, Chain};
use homlift::coalg::{square_probe, CellMap, Complex};
use homlift::cyl::{
    interval_target, IntervalBasis, IntervalCochain, StandardDiagonal, StandardInterval,
};
use homlift::dercx::{window, DerEnv};
use homlift::error::Result;
use homlift::etuple::ETuple;
use homlift::field::{Field, Scalar};
use homlift::linalg::SparseMatrix;
use homlift::operad::{builtin_ass, builtin_com};

use homlift::sigma::{BasisItem, GradedSpace};
use homlift::tree::Node;

use crate::report::CheckLine;

pub fn run() -> Vec<CheckLine> {
    let checks: Vec<(&str, fn() -> Result<()>)> = vec![
        ("tuple differential squares to zero", e_differential_squares),
        ("tuple composition is a chain map", e_compose_chain_map),
        ("bar differential squares to zero (Com)", bar_squares_com),
        ("bar differential squares to zero (Ass)", bar_squares_ass),
        ("builtin operads validate", builtins_validate),
        ("strict structures square to zero", strict_square),
        ("endpoint action matches the degree-zero rules", interval_bullets),
        ("interval differential squares to zero", interval_squares),
        ("doubled target squares to zero", doubled_squares),
        ("derivation windows compose to zero", windows_compose),
    ];
    checks
        .into_iter()
        .map(|(name, f)| match f() {
            Ok(()) => CheckLine {
                name: name.to_string(),
                passed: true,
                detail: None,
            },
            Err(e) => CheckLine {
                name: name.to_string(),
                passed: false,
                detail: Some(e.to_string()),
            },
        })
        .collect()
}

fn fail(msg: String) -> homlift::Error {
    homlift::Error::internal(msg)
}

fn e_differential_squares() -> Result<()> {
    let f = Field::Q;
    for n in 1..=3u8 {
        for d in 0..=3i64 {
            for e in ETuple::basis(n, d) {
                let mut dd: Chain<ETuple> = Chain::new();
                for (t, c) in e.differential(f) {
                    chain_add_all(&mut dd, &t.differential(f), &c);
                }
                if !chain_is_zero(&dd) {
                    return Err(fail(format!("d² != 0 on the tuple {e}")));
                }
            }
        }
    }
    Ok(())
}

fn e_compose_chain_map() -> Result<()> {
    let f = Field::Q;
    let compose_chain = |a: &Chain<ETuple>, i: u8, b: &Chain<ETuple>| {
        let mut out: Chain<ETuple> = Chain::new();
        for (x, cx) in a {
            for (y, cy) in b {
                chain_add_all(&mut out, &x.compose(i, y, f), &cx.mul(cy));
            }
        }
        out
    };
    for dw in 0..=2i64 {
        for dv in 0..=2i64 {
            for w in ETuple::basis(2, dw) {
                for v in ETuple::basis(2, dv) {
                    for i in 1..=2u8 {
                        let mut lhs: Chain<ETuple> = Chain::new();
                        for (t, c) in w.compose(i, &v, f) {
                            chain_add_all(&mut lhs, &t.differential(f), &c);
                        }
                        let one = |e: &ETuple| {
                            let mut c = Chain::new();
                            chain_add(&mut c, e.clone(), Scalar::one(f));
                            c
                        };
                        let mut rhs = compose_chain(&w.differential(f), i, &one(&v));
                        chain_add_all(
                            &mut rhs,
                            &compose_chain(&one(&w), i, &v.differential(f)),
                            &Scalar::sign(f, dw),
                        );
                        if lhs != rhs {
                            return Err(fail(format!("chain rule fails on {w} o_{i} {v}")));
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

fn bar_squares(bar: &BarCtx, name: &str) -> Result<()> {
    let view = BarView { bar };
    for n in 2..=bar.arity_cutoff {
        for w in 1..=2u32 {
            for cell in enumerate_cells(bar, n, w, None)? {
                let d = differential(&view, &cell)?;
                let dd = differential_chain(&view, &d)?;
                if !chain_is_zero(&dd) {
                    return Err(fail(format!("bar d² != 0 over {name} on {cell:?}")));
                }
            }
        }
    }
    Ok(())
}

fn bar_squares_com() -> Result<()> {
    bar_squares(&BarCtx::new(builtin_com(Field::Q, 3), 3, 2)?, "Com")
}

fn bar_squares_ass() -> Result<()> {
    bar_squares(
        &BarCtx::new(builtin_ass(Field::fp(2)?, 3), 3, 2)?,
        "Ass",
    )
}

fn builtins_validate() -> Result<()> {
    builtin_com(Field::Q, 4).validate()?;
    builtin_ass(Field::Q, 3).validate()?;
    builtin_ass(Field::fp(2)?, 3).validate()?;
    Ok(())
}

/// The square-free wedge on one generator: basis (1, x) with x² = 0, all
/// structure concentrated in the strict part.
fn wedge(f: Field, bar: &BarCtx) -> (Complex, CellMap) {
    let degs = [0i64, 1];
    let space = GradedSpace::new(
        degs.iter()
            .enumerate()
            .map(|(i, d)| BasisItem {
                id: format!("x{i}"),
                degree: *d,
            })
            .collect(),
    );
    let a = Complex::undifferentiated(f, space);
    let view = TermView {
        bar,
        leaf_degrees: &degs,
    };
    let mut alpha = CellMap::zero(f, 2, 2, -1);
    for arity in 2..=bar.arity_cutoff {
        for label in 0..bar.label_count(arity) as u32 {
            if bar.suspended_degree(arity, label) != 1 {
                continue;
            }
            for mask in 0u32..(1 << arity) {
                let payloads: Vec<u32> = (0..arity).map(|i| (mask >> i) & 1).collect();
                let ones = payloads.iter().sum::<u32>();
                if ones > 1 {
                    continue;
                }
                let t = Node::corolla(arity, label, &payloads);
                let Some((tc, ts)) = homlift::tree::canonicalize(&view, &t) else {
                    continue;
                };
                if tc != t {
                    continue;
                }
                alpha.comps.insert(tc, vec![(ones, ts)]);
            }
        }
    }
    (a, alpha)
}

fn strict_square() -> Result<()> {
    for f in [Field::Q, Field::fp(2)?] {
        let bar = BarCtx::new(builtin_com(f, 3), 3, 3)?;
        let (a, alpha) = wedge(f, &bar);
        let degs = a.degrees();
        let view = TermView {
            bar: &bar,
            leaf_degrees: &degs,
        };
        for g in 1..=2u32 {
            for t in homlift::dercx::terms_of_grade(&bar, &degs, g, -8, 8)? {
                let sq = square_probe(&view, &alpha, &t)?;
                if !chain_is_zero(&sq) {
                    return Err(fail(format!("(d + d_alpha)² != 0 on {t:?} over {f}")));
                }
            }
        }
    }
    Ok(())
}

fn interval_bullets() -> Result<()> {
    let f = Field::Q;
    let provider = StandardInterval;
    use homlift::cyl::IntervalAction;
    for n in 1..=3u8 {
        let words = all_words(n as usize);
        for word in &words {
            let got = provider.act(f, &ETuple::identity(n), word)?;
            let want = bullet_value(f, word);
            if got.at0 != want.at0 || got.at1 != want.at1 || got.seg != want.seg {
                return Err(fail(format!("endpoint action differs on {word:?}")));
            }
        }
    }
    Ok(())
}

fn all_words(n: usize) -> Vec<Vec<IntervalBasis>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::new();
        for w in &out {
            for b in IntervalBasis::ALL {
                let mut w2 = w.clone();
                w2.push(b);
                next.push(w2);
            }
        }
        out = next;
    }
    out
}

/// Independent restatement of the degree-zero rules for the identity
/// tuple: pure-endpoint words evaluate at their endpoint, boundary words
/// with a single segment pass it through, everything else vanishes.
fn bullet_value(f: Field, word: &[IntervalBasis]) -> IntervalCochain {
    let segs = word
        .iter()
        .filter(|b| matches!(b, IntervalBasis::Seg))
        .count();
    let zeros = word
        .iter()
        .filter(|b| matches!(b, IntervalBasis::V0))
        .count();
    let ones = word
        .iter()
        .filter(|b| matches!(b, IntervalBasis::V1))
        .count();
    let mut out = IntervalCochain::zero(f);
    if segs == 0 && ones == 0 {
        out.at0 = Scalar::one(f);
    } else if segs == 0 && zeros == 0 {
        out.at1 = Scalar::one(f);
    } else if segs == 1 {
        let pos = word
            .iter()
            .position(|b| matches!(b, IntervalBasis::Seg))
            .unwrap();
        let boundary = word[..pos].iter().all(|b| matches!(b, IntervalBasis::V0))
            && word[pos + 1..].iter().all(|b| matches!(b, IntervalBasis::V1));
        if boundary {
            out.seg = Scalar::one(f);
        }
    }
    out
}

fn interval_squares() -> Result<()> {
    let f = Field::Q;
    for b in IntervalBasis::ALL {
        let once = IntervalCochain::basis(f, b).differential(f);
        let twice = once.differential(f);
        if !twice.is_zero() {
            return Err(fail(format!("interval d² != 0 on {b:?}")));
        }
    }
    Ok(())
}

fn doubled_squares() -> Result<()> {
    for f in [Field::Q, Field::fp(2)?] {
        let bar = BarCtx::new(builtin_com(f, 2), 2, 2)?;
        let (b, beta) = wedge(f, &bar);
        let target = interval_target(
            &bar,
            &b.degrees(),
            &beta,
            &StandardInterval,
            &StandardDiagonal,
            1,
        )?;
        if !target.gaps.is_empty() {
            return Err(fail("shipped providers left gaps on the wedge".into()));
        }
        let degs = target.degs.clone();
        let view = TermView {
            bar: &bar,
            leaf_degrees: &degs,
        };
        for g in 1..=1u32 {
            for t in homlift::dercx::terms_of_grade(&bar, &degs, g, -8, 8)? {
                let sq = square_probe(&view, &target.map, &t)?;
                if !chain_is_zero(&sq) {
                    return Err(fail(format!("doubled target d² != 0 on {t:?} over {f}")));
                }
            }
        }
    }
    Ok(())
}

fn windows_compose() -> Result<()> {
    let f = Field::Q;
    let bar = BarCtx::new(builtin_com(f, 3), 3, 3)?;
    let (a, alpha) = wedge(f, &bar);
    let a_degs = a.degrees();
    let f0 = SparseMatrix::identity(2, f);
    let env = DerEnv {
        bar: &bar,
        a_degs: &a_degs,
        b_degs: &a_degs,
        alpha: &alpha,
        beta: &alpha,
        f0: &f0,
    };
    for d in 1..=2u32 {
        for h in [0i64, 1] {
            let win = window(&env, d, h)?;
            let comp = win.d_out.mul_mat(&win.d_in);
            if !comp.is_zero() {
                return Err(fail(format!("window ({d},{h}) does not compose to zero")));
            }
        }
    }
    Ok(())
}
