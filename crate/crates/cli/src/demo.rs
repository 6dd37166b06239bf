//! Worked example and plot data.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ambiglab::cones::{sample, ConeSpec};
use ambiglab::conv::convolve;
use ambiglab::generators::{rotational_closed_form, rotational_family};
use ambiglab::linalg::{collinearity_ratio, max_abs_diff};
use ambiglab::reference as refv;
use ambiglab::IndexSet;
use anyhow::Context;

const THETA: f64 = 0.3;
const PHI: f64 = 1.1;
const SAMPLE_SEED: u64 = 14;

fn tuple<T: ToString>(v: &[T]) -> String {
    let items: Vec<String> = v.iter().map(ToString::to_string).collect();
    format!("({})", items.join(","))
}

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn run(out: Option<&Path>) -> anyhow::Result<String> {
    let mut s = String::new();
    let z1 = convolve(&refv::X1, &refv::Y1)?;
    let z2 = convolve(&refv::X2, &refv::Y2)?;
    writeln!(s, "x1 = {}", tuple(&refv::X1))?;
    writeln!(s, "y1 = {}", tuple(&refv::Y1))?;
    writeln!(s, "x2 = {}", tuple(&refv::X2))?;
    writeln!(s, "y2 = {}", tuple(&refv::Y2))?;
    writeln!(s, "z = {}", tuple(&z1))?;
    writeln!(s, "x1 * y1 == x2 * y2: {}", z1 == z2)?;
    let (x1, y1) = (refv::to_f64(&refv::X1), refv::to_f64(&refv::Y1));
    let (x2, y2) = (refv::to_f64(&refv::X2), refv::to_f64(&refv::Y2));
    writeln!(s, "x1, x2 linearly independent: {}", collinearity_ratio(&x1, &x2) > 1e-6)?;

    let (a, b) = rotational_family(&x1, &y1, &x2, &y2, THETA, PHI)?;
    let za = a.convolution()?;
    let zb = b.convolution()?;
    let zc = rotational_closed_form(&x1, &y1, &x2, &y2, THETA, PHI)?;
    writeln!(s, "rotated pairs at theta = {THETA}, phi = {PHI}:")?;
    writeln!(s, "  max |z1' - z2'| = {:.3e}", max_abs_diff(&za, &zb))?;
    writeln!(s, "  max |z1' - closed form| = {:.3e}", max_abs_diff(&za, &zc))?;

    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let lambda = IndexSet::new(refv::CODED_LAMBDA)?;
        let d = refv::CODED_DIM;

        let sparse = sample(&ConeSpec::zero(lambda.clone(), d)?, SAMPLE_SEED)?;
        let mut w = csv::Writer::from_path(dir.join("fig1.csv"))?;
        w.write_record(["index", "value", "in_lambda"])?;
        for (i, v) in sparse.iter().enumerate() {
            w.write_record([(i + 1).to_string(), sci(*v), lambda.contains(i + 1).to_string()])?;
        }
        w.flush()?;

        let mut coded = sample(&ConeSpec::unconstrained(d)?, SAMPLE_SEED)?;
        for (j, bj) in lambda.iter().zip(refv::CODED_B) {
            coded[j - 1] = refv::CODED_C * bj;
        }
        let mut w = csv::Writer::from_path(dir.join("fig3.csv"))?;
        w.write_record(["index", "value", "in_lambda", "code"])?;
        for (i, v) in coded.iter().enumerate() {
            let code = lambda
                .as_slice()
                .iter()
                .position(|&j| j == i + 1)
                .map(|k| sci(refv::CODED_B[k]))
                .unwrap_or_default();
            w.write_record([(i + 1).to_string(), sci(*v), lambda.contains(i + 1).to_string(), code])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("rotational.csv"))?;
        w.write_record(["index", "z_first", "z_second", "z_closed_form"])?;
        for i in 0..za.len() {
            w.write_record([(i + 1).to_string(), sci(za[i]), sci(zb[i]), sci(zc[i])])?;
        }
        w.flush()?;
        writeln!(s, "wrote fig1.csv, fig3.csv, rotational.csv to {}", dir.display())?;
    }
    Ok(s)
}
