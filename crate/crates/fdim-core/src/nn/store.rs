//! Named parameter store and per-forward binding session.
//!
//! Parameters live outside any tape; a [`Session`] binds them into a tape as
//! leaves on first use and returns the same node on every later use, so two
//! forward passes through the same layer on one tape share weights by
//! construction (one leaf, one gradient slot).

use std::collections::HashMap;

use ndarray::{ArcArray, ArrayD, IxDyn};

use crate::tensor::{Gradients, Scalar, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Learned weight vs derived statistic (running mean/var). Buffers are
/// saved and loaded but never trained and never counted as parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Buffer,
}

pub struct Param<T: Scalar> {
    pub name: String,
    pub value: ArcArray<T, IxDyn>,
    pub kind: ParamKind,
    pub trainable: bool,
}

/// All learnable parameters and buffers of a model, addressed by name.
pub struct ParamStore<T: Scalar> {
    params: Vec<Param<T>>,
    by_name: HashMap<String, ParamId>,
}

impl<T: Scalar> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            params: Vec::new(),
            by_name: HashMap::new(),
        }
    }

    pub fn register(&mut self, name: impl Into<String>, value: ArrayD<T>, trainable: bool) -> ParamId {
        self.register_kind(name, value, ParamKind::Weight, trainable)
    }

    pub fn register_buffer(&mut self, name: impl Into<String>, value: ArrayD<T>) -> ParamId {
        self.register_kind(name, value, ParamKind::Buffer, false)
    }

    fn register_kind(
        &mut self,
        name: impl Into<String>,
        value: ArrayD<T>,
        kind: ParamKind,
        trainable: bool,
    ) -> ParamId {
        let name = name.into();
        assert!(
            !self.by_name.contains_key(&name),
            "duplicate parameter name: {name}"
        );
        let id = ParamId(self.params.len());
        self.by_name.insert(name.clone(), id);
        self.params.push(Param {
            name,
            value: value.into_shared(),
            kind,
            trainable,
        });
        id
    }

    /// Freeze or unfreeze every weight whose name starts with `prefix`.
    pub fn set_trainable_prefix(&mut self, prefix: &str, trainable: bool) {
        for p in &mut self.params {
            if p.kind == ParamKind::Weight && p.name.starts_with(prefix) {
                p.trainable = trainable;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn value(&self, id: ParamId) -> ArcArray<T, IxDyn> {
        self.params[id.0].value.clone()
    }

    pub fn set_value(&mut self, id: ParamId, value: ArrayD<T>) {
        assert_eq!(self.params[id.0].value.shape(), value.shape());
        self.params[id.0].value = value.into_shared();
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn lookup(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn is_trainable(&self, id: ParamId) -> bool {
        self.params[id.0].trainable
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param<T>)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Number of scalar parameters in trainable tensors.
    pub fn trainable_count(&self) -> usize {
        self.params
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.value.len())
            .sum()
    }

    /// Number of scalar parameters in weight tensors (frozen or not),
    /// excluding buffers. This is the conventional "parameter count".
    pub fn weight_count(&self) -> usize {
        self.params
            .iter()
            .filter(|p| p.kind == ParamKind::Weight)
            .map(|p| p.value.len())
            .sum()
    }

    /// Flatten all trainable tensors into one f64 vector (store order).
    /// Companion of [`Self::set_trainable_from_flat`]; used by gradient
    /// checks and diagnostics.
    pub fn flatten_trainable(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for p in self.params.iter().filter(|p| p.trainable) {
            out.extend(p.value.iter().map(|v| v.as_f64()));
        }
        out
    }

    pub fn set_trainable_from_flat(&mut self, flat: &[f64]) {
        let mut off = 0;
        for p in self.params.iter_mut().filter(|p| p.trainable) {
            let n = p.value.len();
            let arr = ArrayD::from_shape_vec(
                IxDyn(p.value.shape()),
                flat[off..off + n].iter().map(|&v| T::from_f64(v)).collect(),
            )
            .unwrap();
            p.value = arr.into_shared();
            off += n;
        }
        assert_eq!(off, flat.len(), "flat vector length mismatch");
    }

    /// Begin a forward pass over a fresh tape.
    pub fn session(&self, grad_enabled: bool) -> Session<'_, T> {
        Session {
            tape: Tape::new(),
            store: self,
            bound: HashMap::new(),
            grad_enabled,
        }
    }
}

/// One forward (and optionally backward) pass: a tape plus the parameter
/// bindings made on it.
pub struct Session<'s, T: Scalar> {
    pub tape: Tape<T>,
    store: &'s ParamStore<T>,
    bound: HashMap<ParamId, Var>,
    grad_enabled: bool,
}

impl<'s, T: Scalar> Session<'s, T> {
    /// Bind a parameter into the tape (idempotent per session).
    pub fn bind(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.bound.get(&id) {
            return v;
        }
        let value = self.store.value(id);
        let var = if self.grad_enabled && self.store.is_trainable(id) {
            self.tape.leaf(value)
        } else {
            self.tape.constant(value)
        };
        self.bound.insert(id, var);
        var
    }

    /// Insert a non-parameter input tensor.
    pub fn input(&mut self, value: ArrayD<T>) -> Var {
        self.tape.constant_owned(value)
    }

    pub fn store(&self) -> &ParamStore<T> {
        self.store
    }

    /// Var a parameter was bound to in this session, if any.
    pub fn bound_var(&self, id: ParamId) -> Option<Var> {
        self.bound.get(&id).copied()
    }

    /// Run backward from `root` and collect parameter gradients aligned with
    /// store indices.
    pub fn grads(&self, root: Var) -> GradVec<T> {
        let mut grads = self.tape.backward(root);
        self.collect(&mut grads)
    }

    fn collect(&self, grads: &mut Gradients<T>) -> GradVec<T> {
        let mut out: Vec<Option<ArrayD<T>>> = (0..self.store.len()).map(|_| None).collect();
        for (&id, &var) in &self.bound {
            if let Some(g) = grads.take(var) {
                out[id.0] = Some(g);
            }
        }
        GradVec(out)
    }
}

/// Parameter gradients aligned with [`ParamStore`] indices.
pub struct GradVec<T: Scalar>(pub Vec<Option<ArrayD<T>>>);

impl<T: Scalar> GradVec<T> {
    pub fn zeros_like(store: &ParamStore<T>) -> Self {
        GradVec((0..store.len()).map(|_| None).collect())
    }

    pub fn add(&mut self, other: GradVec<T>) {
        for (slot, g) in self.0.iter_mut().zip(other.0) {
            match (slot.as_mut(), g) {
                (Some(acc), Some(g)) => *acc += &g,
                (None, Some(g)) => *slot = Some(g),
                _ => {}
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for g in self.0.iter_mut().flatten() {
            g.mapv_inplace(|v| v * factor);
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&ArrayD<T>> {
        self.0[id.0].as_ref()
    }

    /// Flatten gradients for trainable params in store order; absent
    /// gradients contribute zeros.
    pub fn flatten_trainable(&self, store: &ParamStore<T>) -> Vec<f64> {
        let mut out = Vec::new();
        for (id, p) in store.iter() {
            if !p.trainable {
                continue;
            }
            match self.get(id) {
                Some(g) => out.extend(g.iter().map(|v| v.as_f64())),
                None => out.extend(std::iter::repeat(0.0).take(p.value.len())),
            }
        }
        out
    }

    /// Euclidean norm over all present gradients.
    pub fn global_norm(&self) -> f64 {
        let mut acc = 0.0f64;
        for g in self.0.iter().flatten() {
            for &v in g.iter() {
                let v = v.as_f64();
                acc += v * v;
            }
        }
        acc.sqrt()
    }
}

/// Scale gradients so their global norm does not exceed `max_norm`.
/// Returns the pre-clip norm.
pub fn clip_global_norm<T: Scalar>(grads: &mut GradVec<T>, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(T::from_f64(max_norm / norm));
    }
    norm
}
