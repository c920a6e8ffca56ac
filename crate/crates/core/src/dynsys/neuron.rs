//! Simplified Hodgkin-Huxley-type neuron with fast (`n`) and slow (`h`)
//! potassium gates and an NMDA current. Units: mV, ms, µF, mS, µA.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuronParams<T> {
    /// Injected current.
    pub i_ext: T,
    pub c: T,
    pub g_l: T,
    pub e_l: T,
    pub g_na: T,
    pub e_na: T,
    pub vh_na: T,
    pub k_na: T,
    pub g_k: T,
    pub e_k: T,
    pub vh_k: T,
    pub k_k: T,
    pub tau_n: T,
    pub g_m: T,
    pub vh_m: T,
    pub k_m: T,
    pub tau_h: T,
    pub g_nmda: T,
    pub e_nmda: T,
}

impl<T: Scalar> Default for NeuronParams<T> {
    fn default() -> Self {
        let l = T::lit;
        Self {
            i_ext: l(0.0),
            c: l(6.0),
            g_l: l(8.0),
            e_l: l(-80.0),
            g_na: l(20.0),
            e_na: l(60.0),
            vh_na: l(-20.0),
            k_na: l(15.0),
            g_k: l(10.0),
            e_k: l(-90.0),
            vh_k: l(-25.0),
            k_k: l(5.0),
            tau_n: l(1.0),
            g_m: l(25.0),
            vh_m: l(-15.0),
            k_m: l(5.0),
            tau_h: l(200.0),
            g_nmda: l(10.2),
            e_nmda: l(0.0),
        }
    }
}

impl<T: Scalar> NeuronParams<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("C", self.c), ("tau_n", self.tau_n), ("tau_h", self.tau_h)] {
            if !(v > T::zero()) {
                return invalid(format!("neuron parameter {name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("gL", self.g_l),
            ("gNa", self.g_na),
            ("gK", self.g_k),
            ("gM", self.g_m),
            ("gNMDA", self.g_nmda),
        ] {
            if v < T::zero() {
                return invalid(format!("conductance {name} must be non-negative, got {v}"));
            }
        }
        if [self.k_na, self.k_k, self.k_m].iter().any(|&k| k == T::zero()) {
            return invalid("gating slopes must be non-zero");
        }
        Ok(())
    }

    pub fn m_inf(&self, v: T) -> T {
        boltzmann(v, self.vh_na, self.k_na)
    }

    pub fn n_inf(&self, v: T) -> T {
        boltzmann(v, self.vh_k, self.k_k)
    }

    pub fn h_inf(&self, v: T) -> T {
        boltzmann(v, self.vh_m, self.k_m)
    }

    /// NMDA magnesium-block factor.
    pub fn s_inf(&self, v: T) -> T {
        T::one() / (T::one() + T::lit(0.33) * (T::lit(-0.0625) * v).exp())
    }

    /// Membrane potential derivative `dV/dt` for given gate values.
    pub fn dv(&self, v: T, n: T, h: T) -> T {
        let i_ion = self.g_l * (v - self.e_l)
            + self.g_na * self.m_inf(v) * (v - self.e_na)
            + self.g_k * n * (v - self.e_k)
            + self.g_m * h * (v - self.e_k)
            + self.g_nmda * self.s_inf(v) * (v - self.e_nmda);
        (self.i_ext - i_ion) / self.c
    }

    pub(crate) fn lookup(&self, name: &str) -> Option<T> {
        Some(match name {
            "I" => self.i_ext,
            "C" => self.c,
            "gL" => self.g_l,
            "EL" => self.e_l,
            "gNa" => self.g_na,
            "ENa" => self.e_na,
            "VhNa" => self.vh_na,
            "kNa" => self.k_na,
            "gK" => self.g_k,
            "EK" => self.e_k,
            "VhK" => self.vh_k,
            "kK" => self.k_k,
            "tau_n" => self.tau_n,
            "gM" => self.g_m,
            "VhM" => self.vh_m,
            "kM" => self.k_m,
            "tau_h" => self.tau_h,
            "gNMDA" => self.g_nmda,
            "ENMDA" => self.e_nmda,
            _ => return None,
        })
    }

    pub(crate) fn lookup_mut(&mut self, name: &str) -> Option<&mut T> {
        Some(match name {
            "I" => &mut self.i_ext,
            "C" => &mut self.c,
            "gL" => &mut self.g_l,
            "EL" => &mut self.e_l,
            "gNa" => &mut self.g_na,
            "ENa" => &mut self.e_na,
            "VhNa" => &mut self.vh_na,
            "kNa" => &mut self.k_na,
            "gK" => &mut self.g_k,
            "EK" => &mut self.e_k,
            "VhK" => &mut self.vh_k,
            "kK" => &mut self.k_k,
            "tau_n" => &mut self.tau_n,
            "gM" => &mut self.g_m,
            "VhM" => &mut self.vh_m,
            "kM" => &mut self.k_m,
            "tau_h" => &mut self.tau_h,
            "gNMDA" => &mut self.g_nmda,
            "ENMDA" => &mut self.e_nmda,
            _ => return None,
        })
    }
}

#[inline]
fn boltzmann<T: Scalar>(v: T, vh: T, k: T) -> T {
    T::one() / (T::one() + ((vh - v) / k).exp())
}

/// `(dV/dt, dn/dt, dh/dt)` of the full three-dimensional model.
pub fn neuron_vector_field<T: Scalar>(state: [T; 3], p: &NeuronParams<T>) -> [T; 3] {
    let [v, n, h] = state;
    [
        p.dv(v, n, h),
        (p.n_inf(v) - n) / p.tau_n,
        (p.h_inf(v) - h) / p.tau_h,
    ]
}

/// Jacobian of the neuron vector field. With `fixed_h` the model is the
/// planar `(V, n)` reduction and `out` must be 2×2.
pub(crate) fn neuron_jacobian<T: Scalar>(
    state: &[T],
    p: &NeuronParams<T>,
    fixed_h: Option<T>,
    out: &mut Mat<T>,
) {
    let v = state[0];
    let n = state[1];
    let h = fixed_h.unwrap_or_else(|| state[2]);
    let m = p.m_inf(v);
    let s = p.s_inf(v);
    let dm = m * (T::one() - m) / p.k_na;
    let ds = T::lit(0.0625) * s * (T::one() - s);
    let ni = p.n_inf(v);
    let dni = ni * (T::one() - ni) / p.k_k;
    let ddv = -(p.g_l
        + p.g_na * (dm * (v - p.e_na) + m)
        + p.g_k * n
        + p.g_m * h
        + p.g_nmda * (ds * (v - p.e_nmda) + s))
        / p.c;
    out[(0, 0)] = ddv;
    out[(0, 1)] = -p.g_k * (v - p.e_k) / p.c;
    out[(1, 0)] = dni / p.tau_n;
    out[(1, 1)] = -T::one() / p.tau_n;
    if fixed_h.is_none() {
        let hi = p.h_inf(v);
        let dhi = hi * (T::one() - hi) / p.k_m;
        out[(0, 2)] = -p.g_m * (v - p.e_k) / p.c;
        out[(1, 2)] = T::zero();
        out[(2, 0)] = dhi / p.tau_h;
        out[(2, 1)] = T::zero();
        out[(2, 2)] = -T::one() / p.tau_h;
    }
}
