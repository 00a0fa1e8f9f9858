//! Minimal reverse-mode automatic differentiation over dense f32 arrays.
//!
//! A [`Tape`] records one step's computation; [`Var`] handles index into it.
//! Parameters live outside the tape in a [`ParamSet`] and are registered as
//! leaves each step, so gradients can be routed back by parameter id.
//! Reductions accumulate in f64 with a fixed sequential order, which makes
//! runs bit-reproducible for a given seed.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod kernels;
mod ops;
pub mod rng;

pub use adam::{adam_step, AdamParams, AdamState};
pub use ops::Op;
pub use rng::CounterRng;

use crate::error::FormatError;

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

/// A named trainable parameter.
#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Param {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

pub type ParamId = usize;

/// Ordered collection of parameters; creation order is the checkpoint and
/// initialization-draw order.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    params: Vec<Param>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, shape: Vec<usize>, data: Vec<f32>) -> ParamId {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "param {name}: shape {shape:?} vs {} values",
            data.len()
        );
        assert!(
            self.params.iter().all(|p| p.name != name),
            "duplicate parameter name {name}"
        );
        self.params.push(Param { name: name.to_string(), shape, data });
        self.params.len() - 1
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id]
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate()
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name)
    }
}

/// Gradients for a subset of parameters after a backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    by_param: Vec<Option<Vec<f32>>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&[f32]> {
        self.by_param.get(id).and_then(|g| g.as_deref())
    }
}

struct Node {
    shape: Vec<usize>,
    data: Vec<f32>,
    op: Op,
}

/// One training step's recorded computation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f32>>>,
    param_vars: Vec<Option<Var>>,
    consumed: bool,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn push(&mut self, shape: Vec<usize>, data: Vec<f32>, op: Op) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.nodes.push(Node { shape, data, op });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    /// Constant or input leaf: receives no parameter gradient routing.
    pub fn leaf(&mut self, shape: &[usize], data: Vec<f32>) -> Var {
        self.push(shape.to_vec(), data, Op::Leaf)
    }

    pub fn scalar(&mut self, v: f32) -> Var {
        self.leaf(&[1], vec![v])
    }

    /// Register a parameter as a leaf. Repeated registration of the same id
    /// returns the same node, so shared parameters accumulate gradients from
    /// every use site.
    pub fn param(&mut self, id: ParamId, params: &ParamSet) -> Var {
        if self.param_vars.len() <= id {
            self.param_vars.resize(id + 1, None);
        }
        if let Some(v) = self.param_vars[id] {
            return v;
        }
        let p = params.get(id);
        let v = self.push(p.shape.clone(), p.data.clone(), Op::Leaf);
        self.param_vars[id] = Some(v);
        v
    }

    pub fn value(&self, v: Var) -> &[f32] {
        &self.nodes[v.0].data
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Accumulate gradients of `output` into the tape. `output` must be
    /// scalar. Repeated calls without [`Tape::take_gradients`] accumulate.
    pub fn backward(&mut self, output: Var) -> Result<(), FormatError> {
        if self.consumed {
            return Err(FormatError::Malformed("tape already consumed".into()));
        }
        let numel: usize = self.nodes[output.0].shape.iter().product();
        if numel != 1 {
            return Err(FormatError::Malformed(format!(
                "backward needs a scalar output, got shape {:?}",
                self.nodes[output.0].shape
            )));
        }
        match &mut self.grads[output.0] {
            Some(g) => g[0] += 1.0,
            slot => *slot = Some(vec![1.0]),
        }
        for i in (0..self.nodes.len()).rev() {
            if matches!(self.nodes[i].op, Op::Leaf) {
                continue; // leaves keep their accumulated gradients
            }
            let Some(g) = self.grads[i].take() else { continue };
            ops::backward_step(&self.nodes, i, &g, &mut self.grads);
        }
        Ok(())
    }

    /// Gradient buffer of an arbitrary node (useful in tests).
    pub fn grad(&self, v: Var) -> Option<&[f32]> {
        self.grads[v.0].as_deref()
    }

    /// Extract per-parameter gradients and mark the tape consumed.
    pub fn take_gradients(&mut self, params: &ParamSet) -> Gradients {
        self.consumed = true;
        let mut by_param = vec![None; params.len()];
        for (id, var) in self.param_vars.iter().enumerate() {
            if let Some(v) = var {
                if let Some(g) = &self.grads[v.0] {
                    by_param[id] = Some(g.clone());
                }
            }
        }
        Gradients { by_param }
    }
}
