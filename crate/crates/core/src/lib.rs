//! Synthetic labeled 3D scene generation from a pool of class-labeled
//! objects.
//!
//! - [`geometry`]: labeled point clouds, yaw transforms, boxes, downsampling
//! - [`assetio`]: OBJ meshes, labeled scene PLY, pool manifests, label maps
//! - [`objectpool`]: per-class size normalization, capacity and class statistics
//! - [`composer`]: template-based scene composition with occupancy shifting
//! - [`dragplan`]: automatic handle/target planning for drag-based editors
//! - [`promptgen`]: question templates and chat-client prompt collection
//! - [`diffmath`]: DDPM noise-schedule arithmetic

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assetio;
pub mod geometry;
pub mod rng;
pub mod composer;
pub mod diffmath;
pub mod dragplan;
pub mod objectpool;
pub mod promptgen;
