//! CIEDE2000 colour difference (ΔE00) with kL = kC = kH = 1.
//!
//! Angles are carried in degrees throughout, matching the published
//! formulation, and converted to radians only at trigonometric calls.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::color_space::LabTriple;

/// 25^7, the chroma normalisation constant in the G and RC terms.
const POW25_7: f64 = 6_103_515_625.0;

/// A non-negative, finite ΔE00 value.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeltaE(f64);

impl DeltaE {
    pub const ZERO: DeltaE = DeltaE(0.0);

    /// Returns `None` for negative or non-finite input.
    pub fn new(value: f64) -> Option<Self> {
        (value.is_finite() && value >= 0.0).then_some(DeltaE(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Coarse reading of the value on the usual ΔE interpretation scale.
    pub fn band(self) -> PerceptionBand {
        match self.0 {
            v if v < 0.5 => PerceptionBand::Invisible,
            v if v < 2.0 => PerceptionBand::Noticeable,
            v if v < 4.0 => PerceptionBand::Clear,
            v if v <= 10.0 => PerceptionBand::Obvious,
            _ => PerceptionBand::Strong,
        }
    }
}

impl fmt::Display for DeltaE {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl From<DeltaE> for f64 {
    fn from(d: DeltaE) -> f64 {
        d.0
    }
}

/// Interpretation bands for ΔE magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerceptionBand {
    /// 0.0 to 0.5: invisible to slight.
    Invisible,
    /// 0.5 to 2.0: noticeable on inspection.
    Noticeable,
    /// 2.0 to 4.0: clear difference.
    Clear,
    /// 4.0 to 10.0: obvious difference.
    Obvious,
    /// Above 10.0: strong contrast.
    Strong,
}

fn hue_degrees(a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        return 0.0;
    }
    let h = b.atan2(a).to_degrees();
    if h < 0.0 {
        h + 360.0
    } else {
        h
    }
}

/// CIEDE2000 difference between two CIELAB colours.
///
/// Inputs must be finite; the result is always `>= 0`.
pub fn ciede2000(x: LabTriple, y: LabTriple) -> DeltaE {
    let c1 = x.a.hypot(x.b);
    let c2 = y.a.hypot(y.b);
    let c_bar7 = ((c1 + c2) / 2.0).powi(7);
    let g = 0.5 * (1.0 - (c_bar7 / (c_bar7 + POW25_7)).sqrt());

    let a1p = x.a * (1.0 + g);
    let a2p = y.a * (1.0 + g);
    let c1p = a1p.hypot(x.b);
    let c2p = a2p.hypot(y.b);
    let h1p = hue_degrees(a1p, x.b);
    let h2p = hue_degrees(a2p, y.b);

    let dl = y.l - x.l;
    let dc = c2p - c1p;
    let chroma_product = c1p * c2p;

    let dh = if chroma_product == 0.0 {
        0.0
    } else {
        let d = h2p - h1p;
        if d > 180.0 {
            d - 360.0
        } else if d < -180.0 {
            d + 360.0
        } else {
            d
        }
    };
    let dh_big = 2.0 * chroma_product.sqrt() * (dh / 2.0).to_radians().sin();

    let l_bar = (x.l + y.l) / 2.0;
    let c_bar_p = (c1p + c2p) / 2.0;
    let h_bar = if chroma_product == 0.0 {
        h1p + h2p
    } else if (h1p - h2p).abs() <= 180.0 {
        (h1p + h2p) / 2.0
    } else if h1p + h2p < 360.0 {
        (h1p + h2p + 360.0) / 2.0
    } else {
        (h1p + h2p - 360.0) / 2.0
    };

    let t = 1.0 - 0.17 * (h_bar - 30.0).to_radians().cos()
        + 0.24 * (2.0 * h_bar).to_radians().cos()
        + 0.32 * (3.0 * h_bar + 6.0).to_radians().cos()
        - 0.20 * (4.0 * h_bar - 63.0).to_radians().cos();

    let l50 = (l_bar - 50.0).powi(2);
    let sl = 1.0 + 0.015 * l50 / (20.0 + l50).sqrt();
    let sc = 1.0 + 0.045 * c_bar_p;
    let sh = 1.0 + 0.015 * c_bar_p * t;

    let d_theta = 30.0 * (-((h_bar - 275.0) / 25.0).powi(2)).exp();
    let c_bar_p7 = c_bar_p.powi(7);
    let rc = 2.0 * (c_bar_p7 / (c_bar_p7 + POW25_7)).sqrt();
    let rt = -(2.0 * d_theta).to_radians().sin() * rc;

    let tl = dl / sl;
    let tc = dc / sc;
    let th = dh_big / sh;
    let sum = tl * tl + tc * tc + th * th + rt * tc * th;
    // The rotation term can push a true zero a few ulps negative.
    DeltaE(sum.max(0.0).sqrt())
}
