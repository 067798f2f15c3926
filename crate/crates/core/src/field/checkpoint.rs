//! Field checkpoints on top of the shared binary container.
//!
//! `kind = "avatar_field"`, `meta = {"config": FieldConfig}`, blocks
//! `hash_table`, `sdf_net`, `color_net`, `log_sharpness`.

use std::path::Path;

use super::neural::{FieldConfig, ImplicitAvatarField};
use crate::container::{Block, Container};
use crate::error::{Error, Result};

pub const KIND: &str = "avatar_field";
pub const FORMAT_VERSION: u32 = 1;

impl ImplicitAvatarField {
    pub fn to_container(&self) -> Container {
        let meta = serde_json::json!({ "config": self.config() });
        let mut c = Container::new(KIND, FORMAT_VERSION, meta);
        c.push(Block::new("hash_table", vec![self.encoding.table.len()], self.encoding.table.clone()));
        c.push(Block::new("sdf_net", vec![self.sdf_net.params.len()], self.sdf_net.params.clone()));
        c.push(Block::new("color_net", vec![self.color_net.params.len()], self.color_net.params.clone()));
        c.push(Block::new("log_sharpness", vec![1], vec![self.log_sharpness]));
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.kind != KIND {
            return Err(Error::Format(format!("expected `{KIND}`, found `{}`", c.kind)));
        }
        if c.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {}", c.format_version)));
        }
        let config: FieldConfig = serde_json::from_value(
            c.meta
                .get("config")
                .cloned()
                .ok_or_else(|| Error::Format("checkpoint header lacks `config`".into()))?,
        )?;
        let mut field = ImplicitAvatarField::new(config);
        let copy = |dst: &mut [f32], name: &str| -> Result<()> {
            let b = c.block(name)?;
            if b.data.len() != dst.len() {
                return Err(Error::Format(format!(
                    "block `{name}` has {} values, config implies {}",
                    b.data.len(),
                    dst.len()
                )));
            }
            dst.copy_from_slice(&b.data);
            Ok(())
        };
        copy(&mut field.encoding.table, "hash_table")?;
        copy(&mut field.sdf_net.params, "sdf_net")?;
        copy(&mut field.color_net.params, "color_net")?;
        copy(std::slice::from_mut(&mut field.log_sharpness), "log_sharpness")?;
        Ok(field)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&Container::load(path)?)
    }
}
