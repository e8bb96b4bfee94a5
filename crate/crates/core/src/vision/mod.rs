//! Images, augmentation, backbones and the image regression head.

mod augment;
mod backbone;
mod head;
mod image;

pub use augment::{augment, random_erase, rotate, Augmentation, AugmentationSpec};
pub use backbone::{Backbone, ReferenceBackbone};
pub use head::{
    bce_loss, normalize_label, train_image, ImageHeadConfig, ImageModel, ImageSample, BCE_EPSILON, CHECKPOINT_KIND,
};
pub use image::{resize_area, ImageTensor, CHANNELS, FIXTURE_EXTENSION, LUMA};
