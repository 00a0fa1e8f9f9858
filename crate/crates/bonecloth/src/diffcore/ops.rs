//! Operation set: forward constructors on [`Tape`] and the backward rules.

use std::rc::Rc;

use crate::diffcore::{kernels, Node, Tape, Var};
use crate::geometry::{BodySdf, TexelTable};

/// Recorded operation with its input handles and any static data the
/// backward rule needs.
pub enum Op {
    Leaf,
    Matmul { a: Var, b: Var, m: usize, k: usize, n: usize },
    Conv2d { input: Var, weight: Var, bias: Var, h: usize, w: usize, cin: usize, cout: usize, ks: usize },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Mul { a: Var, b: Var },
    AddRow { a: Var, bias: Var, rows: usize, cols: usize },
    Scale { a: Var, c: f32 },
    AddScalar { a: Var },
    Relu { a: Var },
    Softmax { a: Var, rows: usize, cols: usize },
    LayerNorm { a: Var, gamma: Var, beta: Var, rows: usize, cols: usize },
    GatherRows { a: Var, indices: Rc<Vec<usize>>, cols: usize },
    ScatterAddRows { a: Var, indices: Rc<Vec<usize>>, out_rows: usize, cols: usize },
    SumAll { a: Var },
    MeanAll { a: Var },
    SumLastAxis { a: Var, rows: usize, cols: usize },
    MeanAxis0 { a: Var, rows: usize, cols: usize },
    Square { a: Var },
    Sqrt { a: Var },
    Concat { parts: Vec<Var>, rows: usize, widths: Vec<usize> },
    SliceCols { a: Var, rows: usize, cols: usize, start: usize, len: usize },
    Reshape { a: Var },
    BroadcastRows { a: Var, rows: usize, cols: usize },
    Detach,
    MulConst { a: Var, c: Rc<Vec<f32>> },
    AddConst { a: Var },
    Rot6d { a: Var, bones: usize },
    SkinBlend {
        weights: Var,
        rot: Var,
        pos: Var,
        canonical: Rc<Vec<f32>>,
        bone_pos: Rc<Vec<f32>>,
        verts: usize,
        bones: usize,
    },
    Rasterize { a: Var, table: Rc<TexelTable>, channels: usize },
    UvSample { a: Var, table: Rc<TexelTable>, channels: usize },
    SdfDistance { a: Var, sdf: Rc<BodySdf> },
    DihedralDeviation { a: Var, hinges: Rc<Vec<[usize; 4]>>, rest: Rc<Vec<f64>> },
    EdgeLengths { a: Var, edges: Rc<Vec<[usize; 2]>> },
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Leading dimensions collapsed to rows, the last axis as columns.
fn rows_cols(shape: &[usize]) -> (usize, usize) {
    let cols = *shape.last().expect("rank >= 1");
    (numel(shape) / cols, cols)
}

impl Tape {
    fn same_shape(&self, op: &str, a: Var, b: Var) {
        assert_eq!(
            self.shape(a),
            self.shape(b),
            "{op}: shape mismatch {:?} vs {:?}",
            self.shape(a),
            self.shape(b)
        );
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (sa, sb) = (self.shape(a), self.shape(b));
        assert!(
            sa.len() == 2 && sb.len() == 2 && sa[1] == sb[0],
            "matmul: incompatible shapes {sa:?} x {sb:?}"
        );
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        kernels::matmul(self.value(a), self.value(b), &mut out, m, k, n);
        self.push(vec![m, n], out, Op::Matmul { a, b, m, k, n })
    }

    /// Channels-last conv on an `[H, W, Cin]` grid, zero padding, stride 1.
    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Var, ks: usize) -> Var {
        let s = self.shape(input).to_vec();
        assert!(s.len() == 3, "conv2d: input must be [H,W,C], got {s:?}");
        let (h, w, cin) = (s[0], s[1], s[2]);
        let ws = self.shape(weight);
        assert_eq!(
            ws,
            &[ks, ks, cin, ws[3]],
            "conv2d: weight {ws:?} does not match kernel {ks} and cin {cin}"
        );
        let cout = ws[3];
        assert_eq!(self.shape(bias), &[cout], "conv2d: bias mismatch");
        let mut out = vec![0.0; h * w * cout];
        kernels::conv2d(
            self.value(input),
            self.value(weight),
            self.value(bias),
            &mut out,
            h,
            w,
            cin,
            cout,
            ks,
        );
        self.push(
            vec![h, w, cout],
            out,
            Op::Conv2d { input, weight, bias, h, w, cin, cout, ks },
        )
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.same_shape("add", a, b);
        let data = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        self.push(self.shape(a).to_vec(), data, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.same_shape("sub", a, b);
        let data = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x - y).collect();
        self.push(self.shape(a).to_vec(), data, Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.same_shape("mul", a, b);
        let data = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).collect();
        self.push(self.shape(a).to_vec(), data, Op::Mul { a, b })
    }

    /// Trailing-axis bias add: `[.., C] + [C]`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Var {
        let (rows, cols) = rows_cols(self.shape(a));
        assert_eq!(self.shape(bias), &[cols], "add_row: bias mismatch");
        let b = self.value(bias).to_vec();
        let data = self
            .value(a)
            .iter()
            .enumerate()
            .map(|(i, x)| x + b[i % cols])
            .collect();
        self.push(self.shape(a).to_vec(), data, Op::AddRow { a, bias, rows, cols })
    }

    pub fn scale(&mut self, a: Var, c: f32) -> Var {
        let data = self.value(a).iter().map(|x| x * c).collect();
        self.push(self.shape(a).to_vec(), data, Op::Scale { a, c })
    }

    pub fn add_scalar(&mut self, a: Var, c: f32) -> Var {
        let data = self.value(a).iter().map(|x| x + c).collect();
        self.push(self.shape(a).to_vec(), data, Op::AddScalar { a })
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let data = self.value(a).iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect();
        self.push(self.shape(a).to_vec(), data, Op::Relu { a })
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Var {
        let (rows, cols) = rows_cols(self.shape(a));
        let mut out = vec![0.0; rows * cols];
        kernels::softmax_rows(self.value(a), &mut out, rows, cols);
        self.push(self.shape(a).to_vec(), out, Op::Softmax { a, rows, cols })
    }

    /// Layer norm over the last axis with affine parameters.
    pub fn layer_norm(&mut self, a: Var, gamma: Var, beta: Var) -> Var {
        let (rows, cols) = rows_cols(self.shape(a));
        assert_eq!(self.shape(gamma), &[cols], "layer_norm: gamma mismatch");
        assert_eq!(self.shape(beta), &[cols], "layer_norm: beta mismatch");
        let mut out = vec![0.0; rows * cols];
        kernels::layer_norm_rows(
            self.value(a),
            self.value(gamma),
            self.value(beta),
            &mut out,
            rows,
            cols,
            1e-5,
        );
        self.push(self.shape(a).to_vec(), out, Op::LayerNorm { a, gamma, beta, rows, cols })
    }

    /// Select rows of a `[N, C]` tensor by index (repeats allowed).
    pub fn gather_rows(&mut self, a: Var, indices: Rc<Vec<usize>>) -> Var {
        let s = self.shape(a);
        assert_eq!(s.len(), 2, "gather_rows: need [N,C], got {s:?}");
        let cols = s[1];
        let mut out = Vec::with_capacity(indices.len() * cols);
        for &i in indices.iter() {
            out.extend_from_slice(&self.value(a)[i * cols..(i + 1) * cols]);
        }
        self.push(vec![indices.len(), cols], out, Op::GatherRows { a, indices, cols })
    }

    /// Accumulate rows of `[M, C]` into an `[out_rows, C]` tensor at `indices`.
    pub fn scatter_add_rows(&mut self, a: Var, indices: Rc<Vec<usize>>, out_rows: usize) -> Var {
        let s = self.shape(a);
        assert_eq!(s.len(), 2, "scatter_add_rows: need [M,C], got {s:?}");
        assert_eq!(s[0], indices.len(), "scatter_add_rows: row count mismatch");
        let cols = s[1];
        let mut out = vec![0.0; out_rows * cols];
        for (r, &i) in indices.iter().enumerate() {
            assert!(i < out_rows, "scatter_add_rows: index {i} out of {out_rows}");
            let src = &self.value(a)[r * cols..(r + 1) * cols];
            for c in 0..cols {
                out[i * cols + c] += src[c];
            }
        }
        self.push(vec![out_rows, cols], out, Op::ScatterAddRows { a, indices, out_rows, cols })
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = kernels::sum_all(self.value(a));
        self.push(vec![1], vec![s], Op::SumAll { a })
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len();
        let s = kernels::sum_all(self.value(a)) / n as f32;
        self.push(vec![1], vec![s], Op::MeanAll { a })
    }

    /// Reduce the last axis by summation.
    pub fn sum_last_axis(&mut self, a: Var) -> Var {
        let (rows, cols) = rows_cols(self.shape(a));
        let mut out = Vec::with_capacity(rows);
        for r in 0..rows {
            out.push(kernels::sum_all(&self.value(a)[r * cols..(r + 1) * cols]));
        }
        let mut shape = self.shape(a).to_vec();
        shape.pop();
        self.push(shape, out, Op::SumLastAxis { a, rows, cols })
    }

    /// Mean over rows of `[N, C]`, producing `[1, C]`.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let s = self.shape(a);
        assert_eq!(s.len(), 2, "mean_rows: need [N,C], got {s:?}");
        let (rows, cols) = (s[0], s[1]);
        let mut acc = vec![0.0f64; cols];
        for r in 0..rows {
            for c in 0..cols {
                acc[c] += self.value(a)[r * cols + c] as f64;
            }
        }
        let out: Vec<f32> = acc.iter().map(|&x| (x / rows as f64) as f32).collect();
        self.push(vec![1, cols], out, Op::MeanAxis0 { a, rows, cols })
    }

    pub fn square(&mut self, a: Var) -> Var {
        let data = self.value(a).iter().map(|x| x * x).collect();
        self.push(self.shape(a).to_vec(), data, Op::Square { a })
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let data = self.value(a).iter().map(|x| x.sqrt()).collect();
        self.push(self.shape(a).to_vec(), data, Op::Sqrt { a })
    }

    /// Concatenate along the last axis; leading dimensions must agree.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat: empty input");
        let lead = &self.shape(parts[0])[..self.shape(parts[0]).len() - 1].to_vec();
        let rows: usize = lead.iter().product();
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let s = self.shape(p);
            assert_eq!(
                &s[..s.len() - 1],
                lead.as_slice(),
                "concat: leading dims mismatch {s:?}"
            );
            widths.push(*s.last().unwrap());
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p)[r * w..(r + 1) * w]);
            }
        }
        let mut shape = lead.clone();
        shape.push(total);
        self.push(shape, out, Op::Concat { parts: parts.to_vec(), rows, widths })
    }

    /// Columns `[start, start+len)` of a `[N, C]` tensor.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let s = self.shape(a);
        assert_eq!(s.len(), 2, "slice_cols: need [N,C], got {s:?}");
        let (rows, cols) = (s[0], s[1]);
        assert!(start + len <= cols, "slice_cols: {start}+{len} > {cols}");
        let mut out = Vec::with_capacity(rows * len);
        for r in 0..rows {
            out.extend_from_slice(&self.value(a)[r * cols + start..r * cols + start + len]);
        }
        self.push(vec![rows, len], out, Op::SliceCols { a, rows, cols, start, len })
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Var {
        assert_eq!(
            numel(shape),
            self.value(a).len(),
            "reshape: {shape:?} vs {} values",
            self.value(a).len()
        );
        let data = self.value(a).to_vec();
        self.push(shape.to_vec(), data, Op::Reshape { a })
    }

    /// Repeat a `[1, C]` row `rows` times.
    pub fn broadcast_rows(&mut self, a: Var, rows: usize) -> Var {
        let s = self.shape(a);
        assert!(s.len() == 2 && s[0] == 1, "broadcast_rows: need [1,C], got {s:?}");
        let cols = s[1];
        let mut out = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            out.extend_from_slice(self.value(a));
        }
        self.push(vec![rows, cols], out, Op::BroadcastRows { a, rows, cols })
    }

    /// Copy that blocks gradients.
    pub fn detach(&mut self, a: Var) -> Var {
        let data = self.value(a).to_vec();
        self.push(self.shape(a).to_vec(), data, Op::Detach)
    }

    /// Elementwise product with a constant (masking and fixed scalings).
    pub fn mul_const(&mut self, a: Var, c: Rc<Vec<f32>>) -> Var {
        assert_eq!(self.value(a).len(), c.len(), "mul_const: length mismatch");
        let data = self.value(a).iter().zip(c.iter()).map(|(x, y)| x * y).collect();
        self.push(self.shape(a).to_vec(), data, Op::MulConst { a, c })
    }

    /// Elementwise sum with a constant tensor.
    pub fn add_const(&mut self, a: Var, c: &[f32]) -> Var {
        assert_eq!(self.value(a).len(), c.len(), "add_const: length mismatch");
        let data = self.value(a).iter().zip(c.iter()).map(|(x, y)| x + y).collect();
        self.push(self.shape(a).to_vec(), data, Op::AddConst { a })
    }

    /// Decode `[B, 6]` vectors into row-major rotation matrices `[B, 9]` via
    /// Gram-Schmidt (columns: normalized first triple, orthogonalized second,
    /// their cross product).
    pub fn rot6d_to_matrix(&mut self, a: Var) -> Var {
        let s = self.shape(a);
        assert!(s.len() == 2 && s[1] == 6, "rot6d_to_matrix: need [B,6], got {s:?}");
        let bones = s[0];
        let mut out = vec![0.0f32; bones * 9];
        for b in 0..bones {
            let six = &self.value(a)[b * 6..(b + 1) * 6];
            rot6d_forward(six, &mut out[b * 9..(b + 1) * 9]);
        }
        self.push(vec![bones, 9], out, Op::Rot6d { a, bones })
    }

    /// Linear blend skinning of garment vertices from corrected bone frames:
    /// `out_v = sum_b w[v,b] (R_b (canonical_v - bone_pos_b) + pos_b)`.
    pub fn skin_blend(
        &mut self,
        weights: Var,
        rot: Var,
        pos: Var,
        canonical: Rc<Vec<f32>>,
        bone_pos: Rc<Vec<f32>>,
    ) -> Var {
        let ws = self.shape(weights).to_vec();
        assert_eq!(ws.len(), 2, "skin_blend: weights must be [V,B]");
        let (verts, bones) = (ws[0], ws[1]);
        assert_eq!(self.shape(rot), &[bones, 9], "skin_blend: rot mismatch");
        assert_eq!(self.shape(pos), &[bones, 3], "skin_blend: pos mismatch");
        assert_eq!(canonical.len(), verts * 3, "skin_blend: canonical mismatch");
        assert_eq!(bone_pos.len(), bones * 3, "skin_blend: bone_pos mismatch");
        let mut out = vec![0.0f32; verts * 3];
        skin_blend_forward(
            self.value(weights),
            self.value(rot),
            self.value(pos),
            &canonical,
            &bone_pos,
            verts,
            bones,
            &mut out,
        );
        self.push(
            vec![verts, 3],
            out,
            Op::SkinBlend { weights, rot, pos, canonical, bone_pos, verts, bones },
        )
    }

    /// Rasterize `[V, C]` per-vertex values onto the atlas grid `[H, W, C]`.
    pub fn rasterize(&mut self, a: Var, table: Rc<TexelTable>) -> Var {
        let s = self.shape(a);
        assert!(s.len() == 2, "rasterize: need [V,C], got {s:?}");
        assert_eq!(s[0], table.vertex_samples.len(), "rasterize: vertex count mismatch");
        let channels = s[1];
        let mut out = vec![0.0f32; table.height * table.width * channels];
        crate::geometry::rasterize_kernel(&table, self.value(a), channels, &mut out);
        self.push(
            vec![table.height, table.width, channels],
            out,
            Op::Rasterize { a, table, channels },
        )
    }

    /// Bilinear readback of an `[H, W, C]` grid to `[V, C]` vertex values.
    pub fn uv_sample(&mut self, a: Var, table: Rc<TexelTable>) -> Var {
        let s = self.shape(a);
        assert!(
            s.len() == 3 && s[0] == table.height && s[1] == table.width,
            "uv_sample: grid {s:?} does not match table"
        );
        let channels = s[2];
        let mut out = vec![0.0f32; table.vertex_samples.len() * channels];
        crate::geometry::sample_kernel(&table, self.value(a), channels, &mut out);
        self.push(
            vec![table.vertex_samples.len(), channels],
            out,
            Op::UvSample { a, table, channels },
        )
    }

    /// Signed distance of `[V, 3]` positions to the body; backward follows
    /// the analytic SDF gradient.
    pub fn sdf_distance(&mut self, a: Var, sdf: Rc<BodySdf>) -> Var {
        let s = self.shape(a);
        assert!(s.len() == 2 && s[1] == 3, "sdf_distance: need [V,3], got {s:?}");
        let verts = s[0];
        let mut out = Vec::with_capacity(verts);
        for v in 0..verts {
            let p = point_of(self.value(a), v);
            out.push(sdf.signed_distance(&p) as f32);
        }
        self.push(vec![verts], out, Op::SdfDistance { a, sdf })
    }

    /// Per-hinge dihedral deviation from rest angle. Degenerate hinges yield
    /// zero with zero gradient.
    pub fn dihedral_deviation(
        &mut self,
        a: Var,
        hinges: Rc<Vec<[usize; 4]>>,
        rest: Rc<Vec<f64>>,
    ) -> Var {
        let s = self.shape(a);
        assert!(s.len() == 2 && s[1] == 3, "dihedral_deviation: need [V,3], got {s:?}");
        assert_eq!(hinges.len(), rest.len(), "dihedral_deviation: rest length mismatch");
        let mut out = Vec::with_capacity(hinges.len());
        for (h, &r) in hinges.iter().zip(rest.iter()) {
            let p0 = point_of(self.value(a), h[0]);
            let p1 = point_of(self.value(a), h[1]);
            let p2 = point_of(self.value(a), h[2]);
            let p3 = point_of(self.value(a), h[3]);
            let dev = match crate::physics::dihedral_angle(&p0, &p1, &p2, &p3) {
                Some(theta) => (theta - r) as f32,
                None => 0.0,
            };
            out.push(dev);
        }
        self.push(vec![hinges.len()], out, Op::DihedralDeviation { a, hinges, rest })
    }

    /// Lengths of the listed edges of `[V, 3]` positions.
    pub fn edge_lengths(&mut self, a: Var, edges: Rc<Vec<[usize; 2]>>) -> Var {
        let s = self.shape(a);
        assert!(s.len() == 2 && s[1] == 3, "edge_lengths: need [V,3], got {s:?}");
        let mut out = Vec::with_capacity(edges.len());
        for e in edges.iter() {
            let p = point_of(self.value(a), e[0]);
            let q = point_of(self.value(a), e[1]);
            out.push((p - q).norm() as f32);
        }
        self.push(vec![edges.len()], out, Op::EdgeLengths { a, edges })
    }
}

fn point_of(data: &[f32], v: usize) -> nalgebra::Point3<f64> {
    nalgebra::Point3::new(
        data[v * 3] as f64,
        data[v * 3 + 1] as f64,
        data[v * 3 + 2] as f64,
    )
}

/// Gram-Schmidt decode of one 6D vector into a row-major 3x3 matrix, f64
/// internally. Degenerate inputs produce the identity frame.
pub fn rot6d_forward(six: &[f32], out: &mut [f32]) {
    use nalgebra::Vector3;
    let a = Vector3::new(six[0] as f64, six[1] as f64, six[2] as f64);
    let b = Vector3::new(six[3] as f64, six[4] as f64, six[5] as f64);
    let na = a.norm();
    if na < 1e-9 {
        identity3(out);
        return;
    }
    let c1 = a / na;
    let u = b - c1 * b.dot(&c1);
    let nu = u.norm();
    if nu < 1e-9 {
        identity3(out);
        return;
    }
    let c2 = u / nu;
    let c3 = c1.cross(&c2);
    for r in 0..3 {
        out[r * 3] = c1[r] as f32;
        out[r * 3 + 1] = c2[r] as f32;
        out[r * 3 + 2] = c3[r] as f32;
    }
}

fn identity3(out: &mut [f32]) {
    out.copy_from_slice(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
}

#[allow(clippy::too_many_arguments)]
pub fn skin_blend_forward(
    weights: &[f32],
    rot: &[f32],
    pos: &[f32],
    canonical: &[f32],
    bone_pos: &[f32],
    verts: usize,
    bones: usize,
    out: &mut [f32],
) {
    out.fill(0.0);
    for v in 0..verts {
        let cv = &canonical[v * 3..v * 3 + 3];
        let o = &mut out[v * 3..v * 3 + 3];
        for b in 0..bones {
            let w = weights[v * bones + b];
            if w == 0.0 {
                continue;
            }
            let r = &rot[b * 9..b * 9 + 9];
            let pb = &bone_pos[b * 3..b * 3 + 3];
            let q = &pos[b * 3..b * 3 + 3];
            let off = [cv[0] - pb[0], cv[1] - pb[1], cv[2] - pb[2]];
            for row in 0..3 {
                let rotated =
                    r[row * 3] * off[0] + r[row * 3 + 1] * off[1] + r[row * 3 + 2] * off[2];
                o[row] += w * (rotated + q[row]);
            }
        }
    }
}

fn add_grad<'a>(
    grads: &'a mut [Option<Vec<f32>>],
    idx: usize,
    len: usize,
) -> &'a mut Vec<f32> {
    let slot = &mut grads[idx];
    if slot.is_none() {
        *slot = Some(vec![0.0; len]);
    }
    slot.as_mut().unwrap()
}

/// Apply the backward rule of node `i`, whose output cotangent is `g`,
/// accumulating into the input nodes' gradient buffers.
pub(crate) fn backward_step(
    nodes: &[Node],
    i: usize,
    g: &[f32],
    grads: &mut [Option<Vec<f32>>],
) {
    let node = &nodes[i];
    match &node.op {
        Op::Leaf | Op::Detach => {}
        Op::Matmul { a, b, m, k, n } => {
            let (av, bv) = (&nodes[a.0].data, &nodes[b.0].data);
            kernels::matmul_grad_a(g, bv, add_grad(grads, a.0, m * k), *m, *k, *n);
            kernels::matmul_grad_b(av, g, add_grad(grads, b.0, k * n), *m, *k, *n);
        }
        Op::Conv2d { input, weight, bias, h, w, cin, cout, ks } => {
            let iv = &nodes[input.0].data;
            let wv = &nodes[weight.0].data;
            // Work on local buffers to keep a single mutable borrow at a time.
            let mut gi = vec![0.0f32; iv.len()];
            let mut gw = vec![0.0f32; wv.len()];
            let mut gb = vec![0.0f32; *cout];
            kernels::conv2d_backward(iv, wv, g, &mut gi, &mut gw, &mut gb, *h, *w, *cin, *cout, *ks);
            axpy(add_grad(grads, input.0, iv.len()), &gi);
            axpy(add_grad(grads, weight.0, wv.len()), &gw);
            axpy(add_grad(grads, bias.0, *cout), &gb);
        }
        Op::Add { a, b } => {
            axpy(add_grad(grads, a.0, g.len()), g);
            axpy(add_grad(grads, b.0, g.len()), g);
        }
        Op::Sub { a, b } => {
            axpy(add_grad(grads, a.0, g.len()), g);
            let gb = add_grad(grads, b.0, g.len());
            for (o, x) in gb.iter_mut().zip(g) {
                *o -= x;
            }
        }
        Op::Mul { a, b } => {
            let (av, bv) = (&nodes[a.0].data, &nodes[b.0].data);
            {
                let ga = add_grad(grads, a.0, g.len());
                for j in 0..g.len() {
                    ga[j] += g[j] * bv[j];
                }
            }
            let gb = add_grad(grads, b.0, g.len());
            for j in 0..g.len() {
                gb[j] += g[j] * av[j];
            }
        }
        Op::AddRow { a, bias, rows, cols } => {
            axpy(add_grad(grads, a.0, g.len()), g);
            let gb = add_grad(grads, bias.0, *cols);
            for r in 0..*rows {
                for c in 0..*cols {
                    gb[c] += g[r * cols + c];
                }
            }
        }
        Op::Scale { a, c } => {
            let ga = add_grad(grads, a.0, g.len());
            for j in 0..g.len() {
                ga[j] += g[j] * c;
            }
        }
        Op::AddScalar { a } | Op::AddConst { a } | Op::Reshape { a } => {
            axpy(add_grad(grads, a.0, g.len()), g);
        }
        Op::Relu { a } => {
            let av = &nodes[a.0].data;
            let ga = add_grad(grads, a.0, g.len());
            for j in 0..g.len() {
                if av[j] > 0.0 {
                    ga[j] += g[j];
                }
            }
        }
        Op::Softmax { a, rows, cols } => {
            let yv = &node.data;
            let ga = add_grad(grads, a.0, g.len());
            for r in 0..*rows {
                let y = &yv[r * cols..(r + 1) * cols];
                let gr = &g[r * cols..(r + 1) * cols];
                let mut dot = 0.0f64;
                for c in 0..*cols {
                    dot += (gr[c] as f64) * (y[c] as f64);
                }
                for c in 0..*cols {
                    ga[r * cols + c] += y[c] * (gr[c] - dot as f32);
                }
            }
        }
        Op::LayerNorm { a, gamma, beta, rows, cols } => {
            let xv = &nodes[a.0].data;
            let gv = &nodes[gamma.0].data;
            let n = *cols as f64;
            let mut ga_buf = vec![0.0f32; xv.len()];
            let mut gg_buf = vec![0.0f32; *cols];
            let mut gb_buf = vec![0.0f32; *cols];
            for r in 0..*rows {
                let x = &xv[r * cols..(r + 1) * cols];
                let gr = &g[r * cols..(r + 1) * cols];
                let mut mean = 0.0f64;
                for &v in x {
                    mean += v as f64;
                }
                mean /= n;
                let mut var = 0.0f64;
                for &v in x {
                    let d = v as f64 - mean;
                    var += d * d;
                }
                var /= n;
                let inv_std = 1.0 / (var + 1e-5).sqrt();
                // dL/dxhat, plus stats terms
                let mut sum_dxhat = 0.0f64;
                let mut sum_dxhat_xhat = 0.0f64;
                for c in 0..*cols {
                    let xhat = (x[c] as f64 - mean) * inv_std;
                    let dxhat = gr[c] as f64 * gv[c] as f64;
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * xhat;
                    gg_buf[c] += (gr[c] as f64 * xhat) as f32;
                    gb_buf[c] += gr[c];
                }
                for c in 0..*cols {
                    let xhat = (x[c] as f64 - mean) * inv_std;
                    let dxhat = gr[c] as f64 * gv[c] as f64;
                    ga_buf[r * cols + c] +=
                        (inv_std * (dxhat - sum_dxhat / n - xhat * sum_dxhat_xhat / n)) as f32;
                }
            }
            axpy(add_grad(grads, a.0, xv.len()), &ga_buf);
            axpy(add_grad(grads, gamma.0, *cols), &gg_buf);
            axpy(add_grad(grads, beta.0, *cols), &gb_buf);
        }
        Op::GatherRows { a, indices, cols } => {
            let ga = add_grad(grads, a.0, nodes[a.0].data.len());
            for (r, &i) in indices.iter().enumerate() {
                for c in 0..*cols {
                    ga[i * cols + c] += g[r * cols + c];
                }
            }
        }
        Op::ScatterAddRows { a, indices, out_rows: _, cols } => {
            let ga = add_grad(grads, a.0, nodes[a.0].data.len());
            for (r, &i) in indices.iter().enumerate() {
                for c in 0..*cols {
                    ga[r * cols + c] += g[i * cols + c];
                }
            }
        }
        Op::SumAll { a } => {
            let ga = add_grad(grads, a.0, nodes[a.0].data.len());
            for o in ga.iter_mut() {
                *o += g[0];
            }
        }
        Op::MeanAll { a } => {
            let n = nodes[a.0].data.len();
            let ga = add_grad(grads, a.0, n);
            let s = g[0] / n as f32;
            for o in ga.iter_mut() {
                *o += s;
            }
        }
        Op::SumLastAxis { a, rows, cols } => {
            let ga = add_grad(grads, a.0, rows * cols);
            for r in 0..*rows {
                for c in 0..*cols {
                    ga[r * cols + c] += g[r];
                }
            }
        }
        Op::MeanAxis0 { a, rows, cols } => {
            let ga = add_grad(grads, a.0, rows * cols);
            for r in 0..*rows {
                for c in 0..*cols {
                    ga[r * cols + c] += g[c] / *rows as f32;
                }
            }
        }
        Op::Square { a } => {
            let av = &nodes[a.0].data;
            let ga = add_grad(grads, a.0, g.len());
            for j in 0..g.len() {
                ga[j] += 2.0 * av[j] * g[j];
            }
        }
        Op::Sqrt { a } => {
            let yv = &node.data;
            let ga = add_grad(grads, a.0, g.len());
            for j in 0..g.len() {
                if yv[j] > 0.0 {
                    ga[j] += g[j] / (2.0 * yv[j]);
                }
            }
        }
        Op::Concat { parts, rows, widths } => {
            let total: usize = widths.iter().sum();
            let mut offset = 0;
            for (&p, &w) in parts.iter().zip(widths) {
                let gp = add_grad(grads, p.0, rows * w);
                for r in 0..*rows {
                    for c in 0..w {
                        gp[r * w + c] += g[r * total + offset + c];
                    }
                }
                offset += w;
            }
        }
        Op::SliceCols { a, rows, cols, start, len } => {
            let ga = add_grad(grads, a.0, rows * cols);
            for r in 0..*rows {
                for c in 0..*len {
                    ga[r * cols + start + c] += g[r * len + c];
                }
            }
        }
        Op::BroadcastRows { a, rows, cols } => {
            let ga = add_grad(grads, a.0, *cols);
            for r in 0..*rows {
                for c in 0..*cols {
                    ga[c] += g[r * cols + c];
                }
            }
        }
        Op::MulConst { a, c } => {
            let ga = add_grad(grads, a.0, g.len());
            for j in 0..g.len() {
                ga[j] += g[j] * c[j];
            }
        }
        Op::Rot6d { a, bones } => {
            let av = &nodes[a.0].data;
            let ga = add_grad(grads, a.0, bones * 6);
            for b in 0..*bones {
                rot6d_backward(
                    &av[b * 6..(b + 1) * 6],
                    &g[b * 9..(b + 1) * 9],
                    &mut ga[b * 6..(b + 1) * 6],
                );
            }
        }
        Op::SkinBlend { weights, rot, pos, canonical, bone_pos, verts, bones } => {
            let wv = &nodes[weights.0].data;
            let rv = &nodes[rot.0].data;
            let qv = &nodes[pos.0].data;
            let mut gw = vec![0.0f32; verts * bones];
            let mut gr = vec![0.0f32; bones * 9];
            let mut gq = vec![0.0f32; bones * 3];
            for v in 0..*verts {
                let cv = &canonical[v * 3..v * 3 + 3];
                let gv = &g[v * 3..v * 3 + 3];
                for b in 0..*bones {
                    let r = &rv[b * 9..b * 9 + 9];
                    let pb = &bone_pos[b * 3..b * 3 + 3];
                    let q = &qv[b * 3..b * 3 + 3];
                    let off = [cv[0] - pb[0], cv[1] - pb[1], cv[2] - pb[2]];
                    let w = wv[v * bones + b];
                    let mut wgrad = 0.0f32;
                    for row in 0..3 {
                        let rotated = r[row * 3] * off[0]
                            + r[row * 3 + 1] * off[1]
                            + r[row * 3 + 2] * off[2];
                        wgrad += gv[row] * (rotated + q[row]);
                        if w != 0.0 {
                            gq[b * 3 + row] += w * gv[row];
                            for col in 0..3 {
                                gr[b * 9 + row * 3 + col] += w * gv[row] * off[col];
                            }
                        }
                    }
                    gw[v * bones + b] += wgrad;
                }
            }
            axpy(add_grad(grads, weights.0, gw.len()), &gw);
            axpy(add_grad(grads, rot.0, gr.len()), &gr);
            axpy(add_grad(grads, pos.0, gq.len()), &gq);
        }
        Op::Rasterize { a, table, channels } => {
            let ga = add_grad(grads, a.0, nodes[a.0].data.len());
            crate::geometry::rasterize_backward_kernel(table, g, *channels, ga);
        }
        Op::UvSample { a, table, channels } => {
            let ga = add_grad(grads, a.0, nodes[a.0].data.len());
            crate::geometry::sample_backward_kernel(table, g, *channels, ga);
        }
        Op::SdfDistance { a, sdf } => {
            let av = &nodes[a.0].data;
            let ga = add_grad(grads, a.0, av.len());
            for v in 0..av.len() / 3 {
                let p = point_of(av, v);
                let (_, grad) = sdf.distance_and_gradient(&p);
                for c in 0..3 {
                    ga[v * 3 + c] += g[v] * grad[c] as f32;
                }
            }
        }
        Op::DihedralDeviation { a, hinges, rest: _ } => {
            let av = &nodes[a.0].data;
            let ga = add_grad(grads, a.0, av.len());
            for (hi, h) in hinges.iter().enumerate() {
                if g[hi] == 0.0 {
                    continue;
                }
                dihedral_backward(av, h, g[hi] as f64, ga);
            }
        }
        Op::EdgeLengths { a, edges } => {
            let av = &nodes[a.0].data;
            let ga = add_grad(grads, a.0, av.len());
            for (ei, e) in edges.iter().enumerate() {
                let p = point_of(av, e[0]);
                let q = point_of(av, e[1]);
                let d = p - q;
                let len = d.norm();
                if len < 1e-12 {
                    continue;
                }
                let dir = d / len;
                for c in 0..3 {
                    let contrib = (g[ei] as f64 * dir[c]) as f32;
                    ga[e[0] * 3 + c] += contrib;
                    ga[e[1] * 3 + c] -= contrib;
                }
            }
        }
    }
}

fn axpy(out: &mut [f32], x: &[f32]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += v;
    }
}

/// Backward of the Gram-Schmidt 6D decode, f64 internally.
fn rot6d_backward(six: &[f32], g: &[f32], out: &mut [f32]) {
    use nalgebra::Vector3;
    let a = Vector3::new(six[0] as f64, six[1] as f64, six[2] as f64);
    let b = Vector3::new(six[3] as f64, six[4] as f64, six[5] as f64);
    let na = a.norm();
    if na < 1e-9 {
        return;
    }
    let c1 = a / na;
    let d = b.dot(&c1);
    let u = b - c1 * d;
    let nu = u.norm();
    if nu < 1e-9 {
        return;
    }
    let c2 = u / nu;

    // Output cotangents per column (g is row-major).
    let g1 = Vector3::new(g[0] as f64, g[3] as f64, g[6] as f64);
    let g2 = Vector3::new(g[1] as f64, g[4] as f64, g[7] as f64);
    let g3 = Vector3::new(g[2] as f64, g[5] as f64, g[8] as f64);

    // c3 = c1 x c2
    let c2_bar = g2 + g3.cross(&c1);
    let c1_bar_cross = c2.cross(&g3);
    // c2 = u / |u|
    let u_bar = (c2_bar - c2 * c2_bar.dot(&c2)) / nu;
    // u = b - (b . c1) c1
    let b_bar = u_bar - c1 * u_bar.dot(&c1);
    let c1_bar = g1 + c1_bar_cross - u_bar * d - b * u_bar.dot(&c1);
    // c1 = a / |a|
    let a_bar = (c1_bar - c1 * c1_bar.dot(&c1)) / na;

    for i in 0..3 {
        out[i] += a_bar[i] as f32;
        out[3 + i] += b_bar[i] as f32;
    }
}

/// Backward of the signed dihedral angle at one hinge, chain-ruled through
/// its definition, f64 internally.
fn dihedral_backward(positions: &[f32], h: &[usize; 4], theta_bar: f64, ga: &mut [f32]) {
    use nalgebra::Vector3;
    let p = |i: usize| {
        Vector3::new(
            positions[h[i] * 3] as f64,
            positions[h[i] * 3 + 1] as f64,
            positions[h[i] * 3 + 2] as f64,
        )
    };
    let (p0, p1, p2, p3) = (p(0), p(1), p(2), p(3));
    let e = p1 - p0;
    let t2 = p2 - p0;
    let t3 = p3 - p0;
    let n1 = e.cross(&t2);
    let n2 = t3.cross(&e);
    let (l1, l2, le) = (n1.norm(), n2.norm(), e.norm());
    if l1 < 1e-12 || l2 < 1e-12 || le < 1e-12 {
        return;
    }
    let n1h = n1 / l1;
    let n2h = n2 / l2;
    let eh = e / le;
    let cr = n1h.cross(&n2h);
    let s = cr.dot(&eh);
    let c = n1h.dot(&n2h);
    let denom = s * s + c * c;
    let s_bar = theta_bar * c / denom;
    let c_bar = -theta_bar * s / denom;

    // s = cr . eh ; c = n1h . n2h
    let cr_bar = eh * s_bar;
    let mut eh_bar = cr * s_bar;
    let mut n1h_bar = n2h * c_bar;
    let mut n2h_bar = n1h * c_bar;
    // cr = n1h x n2h
    n1h_bar += n2h.cross(&cr_bar);
    n2h_bar += cr_bar.cross(&n1h);
    // normalization pullbacks
    let n1_bar = (n1h_bar - n1h * n1h_bar.dot(&n1h)) / l1;
    let n2_bar = (n2h_bar - n2h * n2h_bar.dot(&n2h)) / l2;
    eh_bar = (eh_bar - eh * eh_bar.dot(&eh)) / le;
    // n2 = t3 x e ; n1 = e x t2
    let t3_bar = e.cross(&n2_bar);
    let e_bar = eh_bar + n2_bar.cross(&t3) + t2.cross(&n1_bar);
    let t2_bar = n1_bar.cross(&e);
    // differentials of e, t2, t3 wrt vertices
    let p0_bar = -(e_bar + t2_bar + t3_bar);
    let accum = |ga: &mut [f32], v: usize, vec: Vector3<f64>| {
        for cidx in 0..3 {
            ga[v * 3 + cidx] += vec[cidx] as f32;
        }
    };
    accum(ga, h[0], p0_bar);
    accum(ga, h[1], e_bar);
    accum(ga, h[2], t2_bar);
    accum(ga, h[3], t3_bar);
}
