//! Reverse-mode autodiff tape.
//!
//! Nodes are appended in evaluation order, so the tape itself is a valid
//! topological order and the backward sweep is a single reverse pass.
//! Values are stored as [`ArcArray`] so binding a large parameter tensor to
//! the tape is a reference-count bump, not a copy.

use ndarray::{ArcArray, ArrayD, ArrayViewD, IxDyn};

use super::scalar::Scalar;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Per-parent gradient contributions produced by one backward op.
/// `None` means "not computed" (parent did not need a gradient).
pub type ParentGrads<T> = Vec<Option<ArrayD<T>>>;

/// Backward rule for one recorded operation.
pub trait BackwardOp<T: Scalar>: Send + Sync {
    /// `grad_out` is dL/d(output); `inputs` are the parent values in the
    /// order they were passed at record time; `needs[i]` tells whether a
    /// gradient for parent `i` is required (skip the work otherwise).
    fn backward(
        &self,
        grad_out: &ArrayD<T>,
        inputs: &[ArrayViewD<'_, T>],
        output: &ArrayViewD<'_, T>,
        needs: &[bool],
    ) -> ParentGrads<T>;
}

struct Node<T: Scalar> {
    value: ArcArray<T, IxDyn>,
    parents: Vec<Var>,
    op: Option<Box<dyn BackwardOp<T>>>,
    needs_grad: bool,
}

/// Recorded computation graph over dynamic-dimension arrays.
pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Insert a leaf that participates in gradient computation.
    pub fn leaf(&mut self, value: ArcArray<T, IxDyn>) -> Var {
        self.push_node(value, Vec::new(), None, true)
    }

    /// Insert a leaf that gradients do not flow into (inputs, constants).
    pub fn constant(&mut self, value: ArcArray<T, IxDyn>) -> Var {
        self.push_node(value, Vec::new(), None, false)
    }

    pub fn constant_owned(&mut self, value: ArrayD<T>) -> Var {
        self.constant(value.into_shared())
    }

    /// Record an operation node. `needs_grad` is inherited from the parents.
    pub fn push_op(
        &mut self,
        value: ArrayD<T>,
        parents: Vec<Var>,
        op: Box<dyn BackwardOp<T>>,
    ) -> Var {
        let needs = parents.iter().any(|p| self.nodes[p.0].needs_grad);
        self.push_node(value.into_shared(), parents, Some(op), needs)
    }

    fn push_node(
        &mut self,
        value: ArcArray<T, IxDyn>,
        parents: Vec<Var>,
        op: Option<Box<dyn BackwardOp<T>>>,
        needs_grad: bool,
    ) -> Var {
        // every node value is standard layout: ops index raw slices and
        // reshape in row-major order
        let value = if value.is_standard_layout() {
            value
        } else {
            value.as_standard_layout().to_owned().into_shared()
        };
        self.nodes.push(Node {
            value,
            parents,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> ArrayViewD<'_, T> {
        self.nodes[v.0].value.view()
    }

    /// Cheap handle to a node's value (Arc clone).
    pub fn value_shared(&self, v: Var) -> ArcArray<T, IxDyn> {
        self.nodes[v.0].value.clone()
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Scalar payload of a single-element node.
    pub fn scalar_value(&self, v: Var) -> T {
        let val = &self.nodes[v.0].value;
        debug_assert_eq!(val.len(), 1, "scalar_value on non-scalar node");
        val.iter().next().copied().unwrap()
    }

    pub fn needs_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Reverse sweep from a scalar root. Returns per-node gradients; interior
    /// gradients are dropped as soon as they have been consumed, leaf
    /// gradients are retained.
    pub fn backward(&self, root: Var) -> Gradients<T> {
        assert_eq!(
            self.nodes[root.0].value.len(),
            1,
            "backward root must be a scalar node"
        );
        let mut grads: Vec<Option<ArrayD<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(ArrayD::ones(IxDyn(self.nodes[root.0].value.shape())));

        for id in (0..=root.0).rev() {
            let node = &self.nodes[id];
            if !node.needs_grad || grads[id].is_none() {
                continue;
            }
            let Some(op) = node.op.as_ref() else {
                continue; // leaf: keep the accumulated gradient
            };
            let grad_out = grads[id].take().expect("checked above");
            let handles: Vec<ArcArray<T, IxDyn>> = node
                .parents
                .iter()
                .map(|p| self.nodes[p.0].value.clone())
                .collect();
            let views: Vec<ArrayViewD<'_, T>> = handles.iter().map(|h| h.view()).collect();
            let needs: Vec<bool> = node
                .parents
                .iter()
                .map(|p| self.nodes[p.0].needs_grad)
                .collect();
            let parent_grads = op.backward(&grad_out, &views, &node.value.view(), &needs);
            debug_assert_eq!(parent_grads.len(), node.parents.len());
            for (parent, grad) in node.parents.iter().zip(parent_grads) {
                let Some(grad) = grad else { continue };
                if !self.nodes[parent.0].needs_grad {
                    continue;
                }
                debug_assert_eq!(grad.shape(), self.nodes[parent.0].value.shape());
                // normalize layout so downstream ops may index raw slices
                let grad = if grad.is_standard_layout() {
                    grad
                } else {
                    grad.as_standard_layout().to_owned()
                };
                match &mut grads[parent.0] {
                    Some(acc) => *acc += &grad,
                    slot @ None => *slot = Some(grad),
                }
            }
        }
        Gradients { grads }
    }
}

/// Result of a backward sweep.
pub struct Gradients<T: Scalar> {
    grads: Vec<Option<ArrayD<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&ArrayD<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<ArrayD<T>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}
