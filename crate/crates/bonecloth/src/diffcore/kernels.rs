//! Raw f32 compute loops shared by the taped operations and the preallocated
//! inference path, so both produce bitwise-identical forwards. Reductions
//! accumulate in f64 with a fixed sequential order.

/// C[m,n] = A[m,k] * B[k,n].
pub fn matmul(a: &[f32], b: &[f32], out: &mut [f32], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    out.fill(0.0);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for j in 0..n {
                orow[j] += av * brow[j];
            }
        }
    }
}

/// C[m,k] += G[m,n] * B[k,n]^T  (gradient wrt the left operand).
pub fn matmul_grad_a(g: &[f32], b: &[f32], out: &mut [f32], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        let orow = &mut out[i * k..(i + 1) * k];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            let mut acc = 0.0f64;
            for j in 0..n {
                acc += (grow[j] as f64) * (brow[j] as f64);
            }
            orow[p] += acc as f32;
        }
    }
}

/// C[k,n] += A[m,k]^T * G[m,n]  (gradient wrt the right operand).
pub fn matmul_grad_b(a: &[f32], g: &[f32], out: &mut [f32], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let grow = &g[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let orow = &mut out[p * n..(p + 1) * n];
            for j in 0..n {
                orow[j] += av * grow[j];
            }
        }
    }
}

/// 2D convolution on an H x W x Cin channels-last image, zero padding,
/// stride 1, square kernel of side `ks` (1 or 3). Weights are
/// [ky][kx][cin][cout] flat; bias has length `cout`.
#[allow(clippy::too_many_arguments)]
pub fn conv2d(
    input: &[f32],
    weight: &[f32],
    bias: &[f32],
    out: &mut [f32],
    h: usize,
    w: usize,
    cin: usize,
    cout: usize,
    ks: usize,
) {
    debug_assert_eq!(input.len(), h * w * cin);
    debug_assert_eq!(weight.len(), ks * ks * cin * cout);
    debug_assert_eq!(out.len(), h * w * cout);
    let half = (ks / 2) as isize;
    for y in 0..h {
        for x in 0..w {
            let orow = &mut out[(y * w + x) * cout..(y * w + x + 1) * cout];
            orow.copy_from_slice(bias);
            for ky in 0..ks {
                let sy = y as isize + ky as isize - half;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                for kx in 0..ks {
                    let sx = x as isize + kx as isize - half;
                    if sx < 0 || sx >= w as isize {
                        continue;
                    }
                    let irow = &input[((sy as usize) * w + sx as usize) * cin..][..cin];
                    let wbase = (ky * ks + kx) * cin * cout;
                    for (ci, &iv) in irow.iter().enumerate() {
                        if iv == 0.0 {
                            continue;
                        }
                        let wrow = &weight[wbase + ci * cout..][..cout];
                        for co in 0..cout {
                            orow[co] += iv * wrow[co];
                        }
                    }
                }
            }
        }
    }
}

/// Gradients of `conv2d` wrt input, weight and bias, accumulated in place.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward(
    input: &[f32],
    weight: &[f32],
    grad_out: &[f32],
    grad_input: &mut [f32],
    grad_weight: &mut [f32],
    grad_bias: &mut [f32],
    h: usize,
    w: usize,
    cin: usize,
    cout: usize,
    ks: usize,
) {
    let half = (ks / 2) as isize;
    for y in 0..h {
        for x in 0..w {
            let grow = &grad_out[(y * w + x) * cout..(y * w + x + 1) * cout];
            for co in 0..cout {
                grad_bias[co] += grow[co];
            }
            for ky in 0..ks {
                let sy = y as isize + ky as isize - half;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                for kx in 0..ks {
                    let sx = x as isize + kx as isize - half;
                    if sx < 0 || sx >= w as isize {
                        continue;
                    }
                    let ibase = ((sy as usize) * w + sx as usize) * cin;
                    let wbase = (ky * ks + kx) * cin * cout;
                    for ci in 0..cin {
                        let iv = input[ibase + ci];
                        let wrow = &weight[wbase + ci * cout..][..cout];
                        let gw = &mut grad_weight[wbase + ci * cout..][..cout];
                        let mut acc = 0.0f64;
                        for co in 0..cout {
                            acc += (wrow[co] as f64) * (grow[co] as f64);
                            gw[co] += iv * grow[co];
                        }
                        grad_input[ibase + ci] += acc as f32;
                    }
                }
            }
        }
    }
}

/// Row-wise softmax over the last axis.
pub fn softmax_rows(input: &[f32], out: &mut [f32], rows: usize, cols: usize) {
    for r in 0..rows {
        let x = &input[r * cols..(r + 1) * cols];
        let o = &mut out[r * cols..(r + 1) * cols];
        let mut max = f32::NEG_INFINITY;
        for &v in x {
            max = max.max(v);
        }
        let mut total = 0.0f64;
        for (oi, &v) in o.iter_mut().zip(x) {
            let e = (v - max).exp();
            *oi = e;
            total += e as f64;
        }
        let inv = (1.0 / total) as f32;
        for oi in o.iter_mut() {
            *oi *= inv;
        }
    }
}

/// Layer norm over the last axis with affine (gamma, beta).
pub fn layer_norm_rows(
    input: &[f32],
    gamma: &[f32],
    beta: &[f32],
    out: &mut [f32],
    rows: usize,
    cols: usize,
    eps: f32,
) {
    for r in 0..rows {
        let x = &input[r * cols..(r + 1) * cols];
        let o = &mut out[r * cols..(r + 1) * cols];
        let mut mean = 0.0f64;
        for &v in x {
            mean += v as f64;
        }
        mean /= cols as f64;
        let mut var = 0.0f64;
        for &v in x {
            let d = v as f64 - mean;
            var += d * d;
        }
        var /= cols as f64;
        let inv_std = 1.0 / (var + eps as f64).sqrt();
        for c in 0..cols {
            let norm = ((x[c] as f64 - mean) * inv_std) as f32;
            o[c] = norm * gamma[c] + beta[c];
        }
    }
}

/// Sum of all elements, f64 accumulator, sequential order.
pub fn sum_all(input: &[f32]) -> f32 {
    let mut acc = 0.0f64;
    for &v in input {
        acc += v as f64;
    }
    acc as f32
}
