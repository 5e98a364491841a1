//! `symtrain gen-data`: materialize the configured dataset as CSV plus the
//! companion files other commands consume (attribute map, per-attribute
//! partitions, default eyeglass mask).

use std::path::{Path, PathBuf};

use symtrain_core::attack::Mask;
use symtrain_core::data::{partition_classes_by_attribute, save_attributes, write_csv};
use symtrain_core::subgroup::Partition;
use symtrain_core::Result;

use crate::config::RunConfig;
use crate::io_util::ensure_dir;
use crate::manifest::RunManifest;

use super::say;

pub struct GenDataOutput {
    pub csv_path: PathBuf,
    pub attribute_path: Option<PathBuf>,
    pub partition_paths: Vec<PathBuf>,
    pub mask_path: Option<PathBuf>,
}

pub fn cmd_gen_data(cfg: &RunConfig, out_dir: &Path, quiet: bool) -> Result<GenDataOutput> {
    ensure_dir(out_dir)?;
    let mut manifest = RunManifest::begin("gen-data", cfg, vec![cfg.data.seed])?;
    let (ds, warnings) = cfg.build_dataset()?;
    for w in &warnings {
        say(quiet, &format!("warning: {w}"));
    }

    let csv_path = out_dir.join("dataset.csv");
    write_csv(&ds, &csv_path)?;
    manifest.record(&csv_path);
    say(
        quiet,
        &format!("wrote {} ({} samples)", csv_path.display(), ds.labels.len()),
    );

    let mut attribute_path = None;
    let mut partition_paths = Vec::new();
    if let Some(attrs) = &ds.attributes {
        let path = out_dir.join("attributes.json");
        save_attributes(attrs, &path)?;
        manifest.record(&path);
        attribute_path = Some(path);
        let names: Vec<String> = attrs
            .values()
            .flat_map(|m| m.keys().cloned())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        for attr in names {
            let groups = partition_classes_by_attribute(attrs, &attr)?;
            let partition = Partition::named(groups)?;
            let path = out_dir.join(format!("partition_{attr}.json"));
            partition.save(&path)?;
            manifest.record(&path);
            partition_paths.push(path);
        }
    }

    let mask_path = match cfg.image_hw() {
        Some((h, w)) if h >= 4 && w >= 4 => {
            let path = out_dir.join("eyeglass.pgm");
            Mask::eyeglass(h, w)?.save(&path)?;
            manifest.record(&path);
            Some(path)
        }
        _ => None,
    };

    let manifest_path = out_dir.join("manifest.json");
    manifest.finish(&manifest_path)?;
    Ok(GenDataOutput {
        csv_path,
        attribute_path,
        partition_paths,
        mask_path,
    })
}
