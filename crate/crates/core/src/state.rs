use crate::error::{Error, Result};
use crate::params::{ModelParams, N_MIN};

/// Number density `f_n(a_i)` on the node grid.
///
/// Storage is node-major: the class vector at node `i` is the contiguous
/// slice `data[i * n_classes..(i + 1) * n_classes]`. The collision step acts
/// on these columns independently.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    data: Vec<f64>,
    n_classes: usize,
    num_nodes: usize,
    pub time: f64,
}

impl SimState {
    pub fn zeros(params: &ModelParams) -> Self {
        Self::zeros_shape(params.n_classes(), params.grid.num_nodes)
    }

    pub(crate) fn zeros_shape(n_classes: usize, num_nodes: usize) -> Self {
        Self {
            data: vec![0.0; n_classes * num_nodes],
            n_classes,
            num_nodes,
            time: 0.0,
        }
    }

    /// Build from a density function `f(n, a)`.
    pub fn from_fn(params: &ModelParams, mut f: impl FnMut(usize, f64) -> f64) -> Self {
        let mut s = Self::zeros(params);
        for i in 0..s.num_nodes {
            let a = params.grid.node(i);
            for n in params.classes() {
                s.data[i * s.n_classes + (n - N_MIN)] = f(n, a);
            }
        }
        s
    }

    pub fn from_node_major(n_classes: usize, num_nodes: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_classes * num_nodes {
            return Err(Error::Contract(format!(
                "expected {} values, got {}",
                n_classes * num_nodes,
                data.len()
            )));
        }
        Ok(Self {
            data,
            n_classes,
            num_nodes,
            time: 0.0,
        })
    }

    #[inline]
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Largest class index held by this state.
    pub fn n_max(&self) -> usize {
        self.n_classes + N_MIN - 1
    }

    #[inline]
    pub fn get(&self, n: usize, i: usize) -> f64 {
        self.data[i * self.n_classes + (n - N_MIN)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, i: usize, v: f64) {
        self.data[i * self.n_classes + (n - N_MIN)] = v;
    }

    #[inline]
    pub fn column(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_classes..(i + 1) * self.n_classes]
    }

    #[inline]
    pub fn column_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_classes..(i + 1) * self.n_classes]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Values of class `n` along the grid.
    pub fn class_values(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        let k = n - N_MIN;
        self.data.iter().skip(k).step_by(self.n_classes).copied()
    }

    pub fn check_shape(&self, params: &ModelParams) -> Result<()> {
        if self.n_classes != params.n_classes() || self.num_nodes != params.grid.num_nodes {
            return Err(Error::Contract(format!(
                "state shape {}x{} does not match params {}x{}",
                self.n_classes,
                self.num_nodes,
                params.n_classes(),
                params.grid.num_nodes
            )));
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &SimState) -> Result<()> {
        if self.n_classes != other.n_classes || self.num_nodes != other.num_nodes {
            return Err(Error::Contract("states live on different grids".into()));
        }
        Ok(())
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// Multiply every value of class `n` by `s`.
    pub fn scale_class(&mut self, n: usize, s: f64) {
        let k = n - N_MIN;
        let nc = self.n_classes;
        self.data.iter_mut().skip(k).step_by(nc).for_each(|v| *v *= s);
    }

    /// Zero-filled copy with a different class count (restriction or extension).
    pub fn resized(&self, n_classes: usize) -> Self {
        let mut out = Self::zeros_shape(n_classes, self.num_nodes);
        let keep = n_classes.min(self.n_classes);
        for i in 0..self.num_nodes {
            out.column_mut(i)[..keep].copy_from_slice(&self.column(i)[..keep]);
        }
        out.time = self.time;
        out
    }

    /// Set `f_n(0) = 0` for every class `n > 6`.
    pub fn enforce_boundary(&mut self) {
        let nc = self.n_classes;
        for k in (7 - N_MIN)..nc {
            self.data[k] = 0.0;
        }
    }

    /// Checkable admissibility conditions: finite, non-negative, zero boundary
    /// values above class 6.
    pub fn check_admissible(&self, neg_tol: f64) -> Result<()> {
        if let Some(v) = self.data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Inadmissible(format!("non-finite density {v}")));
        }
        let min = self.min_value();
        if min < -neg_tol {
            return Err(Error::Inadmissible(format!("negative density {min:e}")));
        }
        for n in 7..=self.n_max() {
            let v = self.get(n, 0);
            if v != 0.0 {
                return Err(Error::Inadmissible(format!("f_{n}(0) = {v:e} but must vanish for n > 6")));
            }
        }
        Ok(())
    }
}
