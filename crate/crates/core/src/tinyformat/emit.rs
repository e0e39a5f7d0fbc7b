use std::fmt::{Display, Write};

use super::TinyModel;
use crate::error::Result;

const PER_LINE: usize = 8;

fn float_lit(v: f32) -> String {
    format!("{v:e}f")
}

fn array<T: Display>(
    out: &mut String,
    ty: &str,
    name: &str,
    values: impl ExactSizeIterator<Item = T>,
) {
    let n = values.len();
    let _ = write!(out, "static const {ty} {name}[{n}] = {{");
    for (i, v) in values.enumerate() {
        if i % PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let _ = write!(out, " {v}");
        if i + 1 < n {
            out.push(',');
        }
    }
    out.push_str("\n};\n\n");
}

/// Emits a C89 translation unit equivalent to the interpreter for the model
/// in `bytes`.
///
/// The model becomes `static const` arrays; `int tinydes_predict(const float *x)`
/// returns the class and `unsigned long tinydes_last_cost(void)` the cost of
/// the last call. Only `<limits.h>` and `<float.h>` are included, and all
/// scratch memory is static.
pub fn emit_static_source(bytes: &[u8]) -> Result<String> {
    let m = TinyModel::from_bytes(bytes)?;
    let mut out = String::new();
    let crc = m.manifest(None).crc32;
    let _ = writeln!(
        out,
        "/* tinydes model: {} bytes, crc32 {crc:#010x} */",
        bytes.len()
    );
    out.push_str(
        "#include <limits.h>\n#include <float.h>\n\n\
         #if UINT_MAX >= 0xFFFFFFFFUL\n\
         typedef unsigned int tdes_u32;\n\
         #else\n\
         typedef unsigned long tdes_u32;\n\
         #endif\n\n",
    );
    let _ = writeln!(out, "#define TDES_N_FEATURES {}UL", m.n_features());
    let _ = writeln!(out, "#define TDES_N_CLASSES {}UL", m.n_classes());
    let _ = writeln!(out, "#define TDES_K {}UL", m.k());
    let _ = writeln!(out, "#define TDES_J {}UL\n", m.j());

    array(
        &mut out,
        "float",
        "tdes_mean",
        m.mean().iter().map(|&v| float_lit(v)),
    );
    array(
        &mut out,
        "float",
        "tdes_inv_std",
        m.inv_std().iter().map(|&v| float_lit(v)),
    );
    array(
        &mut out,
        "float",
        "tdes_centroids",
        m.centroids().iter().map(|&v| float_lit(v)),
    );
    array(
        &mut out,
        "unsigned short",
        "tdes_ensembles",
        m.ensembles().iter(),
    );
    array(
        &mut out,
        "tdes_u32",
        "tdes_node_offset",
        m.directory().iter().map(|d| format!("{}UL", d.0)),
    );
    array(
        &mut out,
        "unsigned short",
        "tdes_node_count",
        m.directory().iter().map(|d| d.1),
    );
    array(
        &mut out,
        "short",
        "tdes_feature",
        m.nodes().iter().map(|n| n.feature),
    );
    array(
        &mut out,
        "float",
        "tdes_threshold",
        m.nodes().iter().map(|n| float_lit(n.threshold)),
    );
    array(
        &mut out,
        "unsigned short",
        "tdes_right_jump",
        m.nodes().iter().map(|n| n.right_jump),
    );

    out.push_str(PREDICT);
    Ok(out)
}

const PREDICT: &str = r#"static float tdes_z[TDES_N_FEATURES];
static unsigned short tdes_votes[TDES_N_CLASSES];
static unsigned long tdes_cost;

unsigned long tinydes_last_cost(void)
{
    return tdes_cost;
}

int tinydes_predict(const float *x)
{
    unsigned long i, c, t, tree, base, n, cluster, label;
    double best, acc;
    float d;

    for (i = 0; i < TDES_N_FEATURES; ++i) {
        d = x[i] - tdes_mean[i];
        tdes_z[i] = d * tdes_inv_std[i];
    }

    cluster = 0;
    best = DBL_MAX;
    for (c = 0; c < TDES_K; ++c) {
        acc = 0.0;
        for (i = 0; i < TDES_N_FEATURES; ++i) {
            d = tdes_z[i] - tdes_centroids[c * TDES_N_FEATURES + i];
            d = d * d;
            acc += (double)d;
        }
        if (acc < best) {
            best = acc;
            cluster = c;
        }
    }

    tdes_cost = TDES_K;
    for (c = 0; c < TDES_N_CLASSES; ++c) {
        tdes_votes[c] = 0;
    }
    for (t = 0; t < TDES_J; ++t) {
        tree = tdes_ensembles[cluster * TDES_J + t];
        base = tdes_node_offset[tree];
        n = base;
        for (;;) {
            ++tdes_cost;
            if (n - base >= tdes_node_count[tree]) {
                break; /* unreachable for a validated model */
            }
            if (tdes_feature[n] < 0) {
                ++tdes_votes[tdes_right_jump[n]];
                break;
            }
            if (tdes_z[tdes_feature[n]] <= tdes_threshold[n]) {
                n = n + 1;
            } else {
                n = base + tdes_right_jump[n];
            }
        }
    }

    label = 0;
    for (c = 1; c < TDES_N_CLASSES; ++c) {
        if (tdes_votes[c] > tdes_votes[label]) {
            label = c;
        }
    }
    return (int)label;
}
"#;
