use super::{OracleError, OracleMethod, OracleResult};
use crate::math::{log_add, log_sum_exp};

/// Widest frontier accepted by the transfer dynamic program.
pub const MAX_DP_WIDTH: usize = 20;

fn spin(bit: usize) -> f64 {
    if bit == 0 {
        -1.0
    } else {
        1.0
    }
}

/// `log Z` of an Ising lattice with uniform coupling `coupling` and
/// per-site fields (row-major, `fields.len() == width * height`), with
/// weights `exp(J s_i s_j)` per bond and `exp(H_i s_i)` per site.
///
/// Sites are added one at a time in row-major order while keeping a table
/// over the frontier of the last `width` spins. With periodic boundaries
/// (bonds wrap along every dimension of size at least 3) the first row is
/// fixed by an outer sum. The lattice is transposed first when that makes
/// the frontier narrower.
pub fn ising_log_z_dp(
    width: usize,
    height: usize,
    coupling: f64,
    fields: &[f64],
    periodic: bool,
) -> Result<OracleResult, OracleError> {
    assert_eq!(fields.len(), width * height, "one field per site");
    let (w, h, f) = if height < width {
        let mut t = vec![0.0; fields.len()];
        for r in 0..height {
            for c in 0..width {
                t[c * height + r] = fields[r * width + c];
            }
        }
        (height, width, t)
    } else {
        (width, height, fields.to_vec())
    };
    if w > MAX_DP_WIDTH {
        return Err(OracleError::WidthTooLarge {
            width: w,
            limit: MAX_DP_WIDTH,
        });
    }
    let wrap_rows = periodic && w >= 3;
    let wrap_cols = periodic && h >= 3;
    let log_z = if wrap_cols {
        let terms: Vec<f64> = (0..1usize << w)
            .map(|first| sweep(w, h, coupling, &f, wrap_rows, Some(first)))
            .collect();
        log_sum_exp(&terms)
    } else {
        sweep(w, h, coupling, &f, wrap_rows, None)
    };
    Ok(OracleResult {
        log_z,
        method: OracleMethod::TransferMatrix,
        marginals: None,
    })
}

/// One pass over the lattice. Bit `c` of a frontier state holds the spin
/// of column `c` in the most recently placed row that reached it.
fn sweep(
    w: usize,
    h: usize,
    coupling: f64,
    fields: &[f64],
    wrap_rows: bool,
    first_row: Option<usize>,
) -> f64 {
    let size = 1usize << w;
    let mut table = vec![f64::NEG_INFINITY; size];
    table[0] = 0.0;
    let mut next = vec![f64::NEG_INFINITY; size];
    for r in 0..h {
        for c in 0..w {
            let bit = 1usize << c;
            let field = fields[r * w + c];
            next.iter_mut().for_each(|v| *v = f64::NEG_INFINITY);
            for s in 0..size {
                if s & bit != 0 {
                    continue;
                }
                // s has bit c cleared; `up` is the previous occupant of bit c
                for up in 0..2usize {
                    let prev = table[s | (up * bit)];
                    if prev == f64::NEG_INFINITY {
                        continue;
                    }
                    for x in 0..2usize {
                        if r == 0 {
                            if let Some(first) = first_row {
                                if (first >> c) & 1 != x {
                                    continue;
                                }
                            }
                        }
                        let sx = spin(x);
                        let mut e = field * sx;
                        if r > 0 {
                            e += coupling * sx * spin(up);
                        }
                        if c > 0 {
                            e += coupling * sx * spin((s >> (c - 1)) & 1);
                        }
                        if wrap_rows && c == w - 1 {
                            e += coupling * sx * spin(s & 1);
                        }
                        if r == h - 1 {
                            if let Some(first) = first_row {
                                e += coupling * sx * spin((first >> c) & 1);
                            }
                        }
                        let target = s | (x * bit);
                        next[target] = log_add(next[target], prev + e);
                    }
                }
            }
            std::mem::swap(&mut table, &mut next);
        }
    }
    log_sum_exp(&table)
}
