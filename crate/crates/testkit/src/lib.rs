//! Reference oracles for the relu-pwa test suites.
//!
//! Everything here works on plain nested `Vec`s and is written the slow,
//! obvious way. None of it calls into `relu-pwa`, so the checks built on top
//! stay independent of the code paths they verify.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One layer as `(weights rows, bias)`.
pub type RawLayer = (Vec<Vec<f64>>, Vec<f64>);

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform weights in `[-weight_scale, weight_scale]` and biases in
/// `[-bias_scale, bias_scale]` for the width chain `widths = [N_0, ..., N_L]`.
pub fn random_layers(
    rng: &mut impl Rng,
    widths: &[usize],
    weight_scale: f64,
    bias_scale: f64,
) -> Vec<RawLayer> {
    widths
        .windows(2)
        .map(|w| {
            let (inputs, outputs) = (w[0], w[1]);
            let rows = (0..outputs)
                .map(|_| {
                    (0..inputs)
                        .map(|_| rng.random_range(-weight_scale..=weight_scale))
                        .collect()
                })
                .collect();
            let bias = (0..outputs)
                .map(|_| {
                    if bias_scale == 0.0 {
                        0.0
                    } else {
                        rng.random_range(-bias_scale..=bias_scale)
                    }
                })
                .collect();
            (rows, bias)
        })
        .collect()
}

/// Rescale the rows of the first weight matrix and the columns of the last
/// one to unit Euclidean norm.
pub fn normalize_outer(layers: &mut [RawLayer]) {
    let first = &mut layers[0].0;
    for row in first.iter_mut() {
        let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            row.iter_mut().for_each(|v| *v /= n);
        }
    }
    let last = &mut layers.last_mut().unwrap().0;
    let cols = last[0].len();
    for j in 0..cols {
        let n = last.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt();
        if n > 0.0 {
            last.iter_mut().for_each(|r| r[j] /= n);
        }
    }
}

pub fn random_point(rng: &mut impl Rng, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    lo.iter()
        .zip(hi)
        .map(|(&a, &b)| rng.random_range(a..b))
        .collect()
}

fn mat_vec(rows: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        let mut s = 0.0;
        for j in 0..x.len() {
            s += row[j] * x[j];
        }
        out.push(s);
    }
    out
}

/// Loop-and-max evaluation, returning every pre-activation and the output.
pub fn naive_forward(layers: &[RawLayer], x: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut pre = Vec::new();
    let mut a = x.to_vec();
    for (idx, (w, b)) in layers.iter().enumerate() {
        let mut y = mat_vec(w, &a);
        for i in 0..y.len() {
            y[i] += b[i];
        }
        if idx + 1 == layers.len() {
            return (pre, y);
        }
        a = y.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
        pre.push(y);
    }
    unreachable!("at least one layer")
}

pub fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b[0].len();
    let inner = b.len();
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for k in 0..inner {
                s += a[i][k] * b[k][j];
            }
            out[i][j] = s;
        }
    }
    out
}

fn diag(mask: &[bool]) -> Vec<Vec<f64>> {
    let n = mask.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        if mask[i] {
            d[i][i] = 1.0;
        }
    }
    d
}

/// `W_L D_{L-1} ... D_1 W_1` with explicit dense diagonal matrices, and the
/// accumulated bias `sum_j W_L D_{L-1} ... W_{j+1} D_j b_j + b_L`.
pub fn dense_affine_piece(layers: &[RawLayer], masks: &[Vec<bool>]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let l = layers.len();
    let mut linear = layers[0].0.clone();
    for k in 1..l {
        linear = mat_mul(&layers[k].0, &mat_mul(&diag(&masks[k - 1]), &linear));
    }
    let mut bias = layers[l - 1].1.clone();
    for j in 0..l - 1 {
        // tail = W_L D_{L-1} ... W_{j+2} D_{j+1}, applied to b_{j+1}
        let mut v: Vec<Vec<f64>> = layers[j].1.iter().map(|&b| vec![b]).collect();
        for k in j + 1..l {
            v = mat_mul(&layers[k].0, &mat_mul(&diag(&masks[k - 1]), &v));
        }
        for i in 0..bias.len() {
            bias[i] += v[i][0];
        }
    }
    (linear, bias)
}

fn support(mask: &[bool]) -> Vec<usize> {
    (0..mask.len()).filter(|&i| mask[i]).collect()
}

/// Explicit path enumeration for the coefficient of atom `(out, inn)`:
/// the sum over all `i_{L-2}, ..., i_2` in the supports of
/// `w_{L-1, out i_{L-2}} ... w_{2, i_2 inn}`.
///
/// Returns `(sum, number of monomials, sum of absolute monomials)`.
/// Layer indices here are 0-based (`layers[1]` is `W_2`).
pub fn path_coefficient(
    layers: &[RawLayer],
    masks: &[Vec<bool>],
    out: usize,
    inn: usize,
) -> (f64, usize, f64) {
    let l = layers.len();
    assert!(l >= 3, "paths need at least one middle matrix");
    // hidden index sequences over spt theta_2 .. spt theta_{L-2}
    let middle: Vec<Vec<usize>> = (1..l - 2).map(|k| support(&masks[k])).collect();
    let mut total = 0.0;
    let mut abs_total = 0.0;
    let mut count = 0;
    let mut path = vec![0usize; middle.len()];
    fn walk(
        depth: usize,
        middle: &[Vec<usize>],
        path: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if depth == middle.len() {
            visit(path);
            return;
        }
        for &i in &middle[depth] {
            path[depth] = i;
            walk(depth + 1, middle, path, visit);
        }
    }
    walk(0, &middle, &mut path, &mut |p: &[usize]| {
        // indices: i_1 = inn, i_2..i_{L-2} = p, i_{L-1} = out
        let mut seq = vec![inn];
        seq.extend_from_slice(p);
        seq.push(out);
        let mut prod = 1.0;
        for k in 1..l - 1 {
            // W_{k+1}[i_{k+1}, i_k]
            prod *= layers[k].0[seq[k]][seq[k - 1]];
        }
        total += prod;
        abs_total += prod.abs();
        count += 1;
    });
    (total, count, abs_total)
}

/// Singular values of a dense matrix by one-sided Jacobi rotations,
/// sorted in decreasing order.
pub fn jacobi_singular_values(a: &[Vec<f64>]) -> Vec<f64> {
    // work on columns of A (or A^T if it is wide)
    let (rows, cols) = (a.len(), a[0].len());
    let mut u: Vec<Vec<f64>> = if rows >= cols {
        (0..cols)
            .map(|j| (0..rows).map(|i| a[i][j]).collect())
            .collect()
    } else {
        a.to_vec()
    };
    let n = u.len();
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = u[p].iter().map(|v| v * v).sum();
                let beta: f64 = u[q].iter().map(|v| v * v).sum();
                let gamma: f64 = u[p].iter().zip(&u[q]).map(|(x, y)| x * y).sum();
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt());
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..u[p].len() {
                    let x = u[p][i];
                    let y = u[q][i];
                    u[p][i] = c * x - s * y;
                    u[q][i] = s * x + c * y;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let mut sv: Vec<f64> = u
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Distance from `v` to the span of `columns`, by modified Gram-Schmidt.
pub fn span_residual(columns: &[Vec<f64>], v: &[f64]) -> f64 {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for c in columns {
        let mut w = c.clone();
        for b in &basis {
            let d: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
            w.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            basis.push(w.into_iter().map(|x| x / n).collect());
        }
    }
    let mut r = v.to_vec();
    for b in &basis {
        let d: f64 = r.iter().zip(b).map(|(x, y)| x * y).sum();
        r.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
    }
    r.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Central finite differences of a scalar function.
pub fn central_gradient(f: impl Fn(&[f64]) -> f64, at: &[f64], step: f64) -> Vec<f64> {
    let mut probe = at.to_vec();
    (0..at.len())
        .map(|i| {
            probe[i] = at[i] + step;
            let up = f(&probe);
            probe[i] = at[i] - step;
            let down = f(&probe);
            probe[i] = at[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Continue a forward pass from the pre-activation `y_k` of hidden layer
/// `k` (1-based) to the network output.
pub fn naive_forward_from_layer(layers: &[RawLayer], k: usize, y_k: &[f64]) -> Vec<f64> {
    let mut y = y_k.to_vec();
    for (w, b) in &layers[k..] {
        let a: Vec<f64> = y.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
        y = mat_vec(w, &a);
        for i in 0..y.len() {
            y[i] += b[i];
        }
    }
    y
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn frobenius(a: &[Vec<f64>]) -> f64 {
    a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

/// Width chain for corpus net `index`: depth cycles through `2..=max_depth`,
/// the input dimension through 1..=3, other widths are drawn from `1..=max_width`.
pub fn corpus_widths(
    rng: &mut impl Rng,
    index: usize,
    max_width: usize,
    max_depth: usize,
) -> Vec<usize> {
    let depth = 2 + index % (max_depth - 1);
    let mut widths = vec![1 + index % 3];
    for _ in 0..depth {
        widths.push(rng.random_range(1..=max_width));
    }
    widths
}

/// `count` fixed-seed networks with weights in [-1, 1] and biases in [-0.5, 0.5].
pub fn random_corpus(
    seed: u64,
    count: usize,
    max_width: usize,
    max_depth: usize,
) -> Vec<Vec<RawLayer>> {
    let mut rng = seeded(seed);
    (0..count)
        .map(|i| {
            let widths = corpus_widths(&mut rng, i, max_width, max_depth);
            random_layers(&mut rng, &widths, 1.0, 0.5)
        })
        .collect()
}
