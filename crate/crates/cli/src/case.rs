//! Synthetic case generation: a model (built-in shape or file) and a seeded
//! deformation of it. The moving set is the model, the fixed set the deformed
//! model, index-matched.

use std::path::{Path, PathBuf};

use acpd_core::shapes::{builtin_shape, BUILTIN_SHAPES};
use acpd_core::{
    apply_bump_blend, denormalize, make_bump_blend_field, normalize_single, random_analytic_deformation, rmse,
    BumpBlendField, PointSet, SynthParams,
};
use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use crate::io::{read_points, write_json, write_points};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Analytic2d,
    Analytic3d,
    Bumpblend3d,
}

impl GeneratorKind {
    pub fn dim(self) -> usize {
        match self {
            GeneratorKind::Analytic2d => 2,
            GeneratorKind::Analytic3d | GeneratorKind::Bumpblend3d => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::Analytic2d => "analytic2d",
            GeneratorKind::Analytic3d => "analytic3d",
            GeneratorKind::Bumpblend3d => "bumpblend3d",
        }
    }
}

impl std::str::FromStr for GeneratorKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "analytic2d" => GeneratorKind::Analytic2d,
            "analytic3d" => GeneratorKind::Analytic3d,
            "bumpblend3d" => GeneratorKind::Bumpblend3d,
            other => bail!("unknown generator '{other}' (analytic2d | analytic3d | bumpblend3d)"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    /// Built-in shape name or path to a point file.
    pub model: String,
    /// Sample count for built-in shapes; ignored for files.
    pub points: usize,
    pub generator: GeneratorKind,
    pub params: SynthParams,
}

impl CaseSpec {
    pub fn id(&self) -> String {
        let model = Path::new(&self.model)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.model.clone());
        format!(
            "{}-{}-{}-s{}",
            model,
            self.generator.name(),
            self.points,
            self.params.seed
        )
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut s = self.clone();
        s.params.seed = seed;
        s
    }

    pub fn load_model(&self) -> Result<PointSet> {
        let model = if BUILTIN_SHAPES.contains(&self.model.as_str()) {
            builtin_shape(&self.model, self.points)?
        } else {
            read_points(Path::new(&self.model))?
        };
        if model.dim() != self.generator.dim() {
            bail!(
                "generator {} needs {}-dimensional points, model has dimension {}",
                self.generator.name(),
                self.generator.dim(),
                model.dim()
            );
        }
        Ok(model)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Deformation {
    Analytic { map: acpd_core::AnalyticMap },
    BumpBlend { field: BumpBlendField },
}

#[derive(Debug, Clone)]
pub struct Case {
    pub spec: CaseSpec,
    pub fixed: PointSet,
    pub moving: PointSet,
    /// Ground truth, in the model's normalized frame.
    pub deformation: Deformation,
}

impl Case {
    pub fn initial_rmse(&self) -> f64 {
        rmse(&self.fixed, &self.moving).expect("index-matched case")
    }
}

/// Builds the case in memory. The deformation acts in the model's own
/// normalized frame and the result is mapped back to model coordinates.
pub fn generate_case(spec: &CaseSpec) -> Result<Case> {
    let model = spec.load_model()?;
    let (norm, frame) = normalize_single(&model)?;
    let d = spec.generator.dim();
    let (deformed, deformation) = match spec.generator {
        GeneratorKind::Analytic2d | GeneratorKind::Analytic3d => {
            let map = random_analytic_deformation(d, spec.params.analytic_order, &spec.params)?;
            (map.apply(&norm)?, Deformation::Analytic { map })
        }
        GeneratorKind::Bumpblend3d => {
            let field = make_bump_blend_field(&norm, &spec.params)?;
            (apply_bump_blend(&field, &norm)?, Deformation::BumpBlend { field })
        }
    };
    Ok(Case {
        spec: spec.clone(),
        fixed: denormalize(&deformed, &frame)?,
        moving: model,
        deformation,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub case_id: String,
    pub spec: CaseSpec,
    pub fixed_file: PathBuf,
    pub moving_file: PathBuf,
    pub initial_rmse: f64,
    pub deformation: Deformation,
}

pub fn cmd_synth(spec: &CaseSpec, out_dir: &Path) -> Result<Manifest> {
    let case = generate_case(spec)?;
    std::fs::create_dir_all(out_dir)?;
    let fixed_file = out_dir.join("fixed.txt");
    let moving_file = out_dir.join("moving.txt");
    write_points(&fixed_file, &case.fixed)?;
    write_points(&moving_file, &case.moving)?;
    let manifest = Manifest {
        case_id: spec.id(),
        spec: spec.clone(),
        fixed_file: "fixed.txt".into(),
        moving_file: "moving.txt".into(),
        initial_rmse: case.initial_rmse(),
        deformation: case.deformation,
    };
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}
