//! Rotation-decoupled IoU (RDIoU) for yawed 3D boxes.
//!
//! * [`box_geometry`]: exact rotated 3D IoU and a Monte-Carlo oracle.
//! * [`target_codec`]: anchor-relative regression targets.
//! * [`rdiou`]: the 4D decoupled IoU, enclosing diagonal and center penalty.
//! * [`losses`]: RDIoU-guided regression and quality focal losses.
//! * [`grad`]: forward-mode gradients and finite-difference checks.
//! * [`sim`]: rotation sweeps, box fitting and k sweeps.
//! * [`output`]: CSV and JSON emission of experiment records.

pub mod box_geometry;
pub mod cli;
pub mod error;
pub mod grad;
pub mod losses;
pub mod output;
pub mod rdiou;
pub mod scalar;
pub mod sim;
pub mod target_codec;

pub use box_geometry::{bev_corners, bev_iou, convex_intersection, iou_3d, iou_3d_monte_carlo, Box3D, Polygon2D};
pub use error::{Error, Result};
pub use grad::{fd_check, grad_iou3d_numeric, grad_loss, grad_rdiou, grad_rqfl, FdReport, GradVector7};
pub use losses::{
    direction_ce, rdiou_ciou_loss, rdiou_diou_loss, rdiou_iou_loss, rqfl, total_loss, LossKind, LossWeights,
    QflParams,
};
pub use rdiou::{center_penalty, decouple, enclosing_diag, overlap_1d, rdiou, DecoupledBox4, RdiouConfig};
pub use target_codec::{anchor_diag, decode, encode, RegressionVector};
