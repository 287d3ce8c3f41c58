//! Revealed-preference welfare analysis on finite demand data, with exact
//! rational arithmetic and independently checkable certificates.

pub mod afriat;
pub mod aggregate;
pub mod certificate;
pub mod collective;
pub mod feasibility;
pub mod individual;
pub mod model;
pub mod numerics;
pub mod revpref;
pub mod synth;
pub mod walras_price;
