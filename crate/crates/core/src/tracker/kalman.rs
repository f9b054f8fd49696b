//! Constant-velocity Kalman filter over `[cx, cy, w, h, vx, vy]`.
//!
//! The center moves with constant velocity driven by white acceleration
//! noise; width and height follow a random walk. Measurements are boxes.

use nalgebra::{Matrix2, SMatrix, SVector, Vector2, Vector4};

use crate::geometry::BBox;

pub type State = SVector<f64, 6>;
pub type Cov = SMatrix<f64, 6, 6>;
type Meas = Vector4<f64>;
type MeasCov = SMatrix<f64, 4, 4>;
type Obs = SMatrix<f64, 4, 6>;

#[derive(Debug, Clone, PartialEq)]
pub struct Kalman {
    pub x: State,
    pub p: Cov,
}

/// Innovation of one measurement against a predicted state.
#[derive(Debug, Clone)]
pub struct Innovation {
    nu: Meas,
    s: MeasCov,
}

impl Innovation {
    /// Squared Mahalanobis distance of the center residual.
    pub fn center_d2(&self) -> f64 {
        let sc = self.center_cov();
        let nu = Vector2::new(self.nu[0], self.nu[1]);
        match sc.try_inverse() {
            Some(inv) => (nu.transpose() * inv * nu)[(0, 0)],
            None => f64::INFINITY,
        }
    }

    /// Log density of the center residual under its predicted covariance.
    pub fn center_log_likelihood(&self) -> f64 {
        let det = self.center_cov().determinant();
        if !(det > 0.0) {
            return f64::NEG_INFINITY;
        }
        -(2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln() - 0.5 * self.center_d2()
    }

    fn center_cov(&self) -> Matrix2<f64> {
        self.s.fixed_view::<2, 2>(0, 0).into_owned()
    }
}

fn observation() -> Obs {
    let mut h = Obs::zeros();
    for k in 0..4 {
        h[(k, k)] = 1.0;
    }
    h
}

fn meas(b: &BBox) -> Meas {
    Vector4::new(b.cx, b.cy, b.w, b.h)
}

impl Kalman {
    /// Start at a measured box with zero velocity.
    pub fn init(b: &BBox, meas_noise: &[f64; 4], velocity_var: f64) -> Self {
        let mut x = State::zeros();
        x.fixed_rows_mut::<4>(0).copy_from(&meas(b));
        let mut p = Cov::zeros();
        for k in 0..4 {
            p[(k, k)] = meas_noise[k];
        }
        p[(4, 4)] = velocity_var;
        p[(5, 5)] = velocity_var;
        Self { x, p }
    }

    /// Time update over `dt` frames.
    pub fn predict(&self, dt: f64, process_noise: &[f64; 4]) -> Self {
        let mut f = Cov::identity();
        f[(0, 4)] = dt;
        f[(1, 5)] = dt;
        let mut q = Cov::zeros();
        let (t2, t3, t4) = (dt * dt, dt * dt * dt, dt * dt * dt * dt);
        for (pos, vel, qa) in [(0, 4, process_noise[0]), (1, 5, process_noise[1])] {
            q[(pos, pos)] = qa * t4 / 4.0;
            q[(pos, vel)] = qa * t3 / 2.0;
            q[(vel, pos)] = qa * t3 / 2.0;
            q[(vel, vel)] = qa * t2;
        }
        q[(2, 2)] = process_noise[2] * dt;
        q[(3, 3)] = process_noise[3] * dt;
        Self {
            x: f * self.x,
            p: f * self.p * f.transpose() + q,
        }
    }

    pub fn innovation(&self, z: &BBox, meas_noise: &[f64; 4]) -> Innovation {
        let h = observation();
        let nu = meas(z) - h * self.x;
        let r = MeasCov::from_diagonal(&Vector4::from(*meas_noise));
        let s = h * self.p * h.transpose() + r;
        Innovation { nu, s }
    }

    /// Measurement update. Falls back to the prior if the innovation
    /// covariance is not invertible.
    pub fn update(&self, z: &BBox, meas_noise: &[f64; 4]) -> Self {
        let h = observation();
        let inn = self.innovation(z, meas_noise);
        let Some(s_inv) = inn.s.try_inverse() else {
            return self.clone();
        };
        let k = self.p * h.transpose() * s_inv;
        let x = self.x + k * inn.nu;
        let ikh = Cov::identity() - k * h;
        let r = MeasCov::from_diagonal(&Vector4::from(*meas_noise));
        // Joseph form keeps P symmetric positive definite
        let p = ikh * self.p * ikh.transpose() + k * r * k.transpose();
        Self { x, p }
    }

    /// Current box estimate, with sizes clamped to stay positive.
    pub fn bbox(&self) -> BBox {
        BBox {
            cx: self.x[0],
            cy: self.x[1],
            w: self.x[2].max(1e-3),
            h: self.x[3].max(1e-3),
        }
    }
}
