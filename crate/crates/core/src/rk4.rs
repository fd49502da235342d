//! Classical fixed-step fourth-order Runge–Kutta.

use std::ops::{Add, Mul};

/// Scratch buffers for repeated RK4 steps on a state of fixed length.
#[derive(Debug, Clone)]
pub struct Rk4<T> {
    k1: Vec<T>,
    k2: Vec<T>,
    k3: Vec<T>,
    k4: Vec<T>,
    tmp: Vec<T>,
}

impl<T> Rk4<T>
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
{
    pub fn new(len: usize) -> Self {
        Self {
            k1: vec![T::default(); len],
            k2: vec![T::default(); len],
            k3: vec![T::default(); len],
            k4: vec![T::default(); len],
            tmp: vec![T::default(); len],
        }
    }

    /// Advances `y` by `dt` under the autonomous system `f(y, dy/dt)`.
    pub fn step<F>(&mut self, y: &mut [T], dt: f64, mut f: F)
    where
        F: FnMut(&[T], &mut [T]),
    {
        debug_assert_eq!(y.len(), self.k1.len());
        let half = 0.5 * dt;

        f(y, &mut self.k1);
        for ((t, &yi), &k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k1) {
            *t = yi + k * half;
        }
        f(&self.tmp, &mut self.k2);
        for ((t, &yi), &k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k2) {
            *t = yi + k * half;
        }
        f(&self.tmp, &mut self.k3);
        for ((t, &yi), &k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k3) {
            *t = yi + k * dt;
        }
        f(&self.tmp, &mut self.k4);

        let sixth = dt / 6.0;
        for (i, yi) in y.iter_mut().enumerate() {
            let incr = self.k1[i] + (self.k2[i] + self.k3[i]) * 2.0 + self.k4[i];
            *yi = *yi + incr * sixth;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C64;

    #[test]
    fn exponential_decay_is_fourth_order() {
        let exact = (-1.0f64).exp();
        let err = |n: usize| {
            let mut y = [1.0f64];
            let mut rk = Rk4::new(1);
            for _ in 0..n {
                rk.step(&mut y, 1.0 / n as f64, |y, dy| dy[0] = -y[0]);
            }
            (y[0] - exact).abs()
        };
        let ratio = err(10) / err(20);
        assert!((ratio - 16.0).abs() < 1.0, "ratio = {ratio}");
    }

    #[test]
    fn complex_rotation_keeps_modulus() {
        let mut y = [C64::new(1.0, 0.0)];
        let mut rk = Rk4::new(1);
        for _ in 0..1000 {
            rk.step(&mut y, 1e-2, |y, dy| dy[0] = -C64::i() * y[0]);
        }
        assert!((y[0].norm() - 1.0).abs() < 1e-10);
        assert!((y[0] - C64::from_polar(1.0, -10.0)).norm() < 1e-8);
    }
}
