//! Stationary-frame space vectors and synchronous-frame complex quantities.
//!
//! A [`Phasor`] is a complex number `re + j·im`. In the αβ frame it represents
//! an instantaneous space vector (e.g. the oscillator state `v` in peak volts);
//! in the synchronous frame it represents an RMS phasor. The same arithmetic
//! serves both uses.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

/// Complex space vector / phasor, `re + j·im`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Phasor {
    pub re: f64,
    pub im: f64,
}

impl Phasor {
    pub const ZERO: Phasor = Phasor { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Self {
        Phasor { re, im }
    }

    /// Unit phasor at the given angle (radians).
    pub fn from_angle(theta: f64) -> Self {
        Phasor::new(theta.cos(), theta.sin())
    }

    /// Polar constructor: `mag · e^{jθ}`.
    pub fn from_polar(mag: f64, theta: f64) -> Self {
        Phasor::new(mag * theta.cos(), mag * theta.sin())
    }

    /// Euclidean norm ‖·‖ = √(re² + im²).
    pub fn norm(self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn norm_sq(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    /// Angle in radians, range (−π, π].
    pub fn angle(self) -> f64 {
        self.im.atan2(self.re)
    }

    pub fn conj(self) -> Self {
        Phasor::new(self.re, -self.im)
    }

    /// Multiplication by the imaginary unit: j·(re + j·im) = −im + j·re.
    pub fn rot90(self) -> Self {
        Phasor::new(-self.im, self.re)
    }

    pub fn scale(self, k: f64) -> Self {
        Phasor::new(self.re * k, self.im * k)
    }

    pub fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl Add for Phasor {
    type Output = Phasor;
    fn add(self, rhs: Phasor) -> Phasor {
        Phasor::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl AddAssign for Phasor {
    fn add_assign(&mut self, rhs: Phasor) {
        self.re += rhs.re;
        self.im += rhs.im;
    }
}

impl Sub for Phasor {
    type Output = Phasor;
    fn sub(self, rhs: Phasor) -> Phasor {
        Phasor::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl SubAssign for Phasor {
    fn sub_assign(&mut self, rhs: Phasor) {
        self.re -= rhs.re;
        self.im -= rhs.im;
    }
}

impl Neg for Phasor {
    type Output = Phasor;
    fn neg(self) -> Phasor {
        Phasor::new(-self.re, -self.im)
    }
}

impl Mul for Phasor {
    type Output = Phasor;
    fn mul(self, rhs: Phasor) -> Phasor {
        Phasor::new(
            self.re * rhs.re - self.im * rhs.im,
            self.re * rhs.im + self.im * rhs.re,
        )
    }
}

impl Mul<f64> for Phasor {
    type Output = Phasor;
    fn mul(self, rhs: f64) -> Phasor {
        self.scale(rhs)
    }
}

impl Mul<Phasor> for f64 {
    type Output = Phasor;
    fn mul(self, rhs: Phasor) -> Phasor {
        rhs.scale(self)
    }
}

impl Div for Phasor {
    type Output = Phasor;
    fn div(self, rhs: Phasor) -> Phasor {
        let d = rhs.norm_sq();
        Phasor::new(
            (self.re * rhs.re + self.im * rhs.im) / d,
            (self.im * rhs.re - self.re * rhs.im) / d,
        )
    }
}

impl Div<f64> for Phasor {
    type Output = Phasor;
    fn div(self, rhs: f64) -> Phasor {
        Phasor::new(self.re / rhs, self.im / rhs)
    }
}
