//! Synthetic scenes of attributed objects.
//!
//! A scene stands in for an image: a handful of objects, each with a
//! category, a few optional categorical attributes and a bounding box in the
//! unit square. Generation is a pure function of `(WorldConfig, seed)`.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_for, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeSpec {
    pub name: String,
    pub values: Vec<String>,
    /// Probability that an object carries this attribute at all.
    pub presence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub categories: Vec<String>,
    pub attributes: Vec<AttributeSpec>,
    pub min_objects: usize,
    pub max_objects: usize,
    pub min_box_size: f64,
    pub max_box_size: f64,
    pub n_train_scenes: usize,
    pub n_test_scenes: usize,
    /// Objects per training scene that are never used as training targets;
    /// NewObject evaluation draws its targets from this set.
    pub new_object_holdout: usize,
    /// Resampling budget for the non-degeneracy invariant.
    pub max_resample: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        let words = |w: &[&str]| w.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        WorldConfig {
            categories: words(&["person", "car", "dog", "cup", "chair", "bird"]),
            attributes: vec![
                AttributeSpec {
                    name: "color".into(),
                    values: words(&["red", "blue", "green", "yellow"]),
                    presence: 0.9,
                },
                AttributeSpec {
                    name: "size".into(),
                    values: words(&["small", "large"]),
                    presence: 1.0,
                },
            ],
            min_objects: 8,
            max_objects: 8,
            min_box_size: 0.1,
            max_box_size: 0.4,
            n_train_scenes: 640,
            n_test_scenes: 200,
            new_object_holdout: 2,
            max_resample: 100,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.categories.is_empty() {
            return Err(Error::config("world.categories", "at least one category is required"));
        }
        if self.min_objects < 2 {
            return Err(Error::config("world.min_objects", "must be >= 2"));
        }
        if self.max_objects < self.min_objects {
            return Err(Error::config("world.max_objects", "must be >= world.min_objects"));
        }
        if !(self.min_box_size > 0.0 && self.min_box_size <= self.max_box_size && self.max_box_size <= 1.0)
        {
            return Err(Error::config(
                "world.min_box_size",
                "box sizes must satisfy 0 < min_box_size <= max_box_size <= 1",
            ));
        }
        if self.n_train_scenes == 0 {
            return Err(Error::config("world.n_train_scenes", "must be >= 1"));
        }
        if self.n_test_scenes == 0 {
            return Err(Error::config("world.n_test_scenes", "must be >= 1"));
        }
        if self.new_object_holdout >= self.min_objects {
            return Err(Error::config(
                "world.new_object_holdout",
                "must be smaller than world.min_objects",
            ));
        }
        if self.max_resample == 0 {
            return Err(Error::config("world.max_resample", "must be >= 1"));
        }
        let mut names = BTreeSet::new();
        for (i, attr) in self.attributes.iter().enumerate() {
            let key = format!("world.attributes[{i}]");
            if !names.insert(attr.name.as_str()) {
                return Err(Error::config(&key, format!("duplicate attribute `{}`", attr.name)));
            }
            if attr.values.is_empty() {
                return Err(Error::config(&format!("{key}.values"), "must not be empty"));
            }
            if !(0.0..=1.0).contains(&attr.presence) {
                return Err(Error::config(&format!("{key}.presence"), "must be in [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeSpec> {
        self.attributes.iter().find(|a| a.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn is_valid(&self) -> bool {
        let coords = [self.x_min, self.y_min, self.x_max, self.y_max];
        coords.iter().all(|c| (0.0..=1.0).contains(c))
            && self.x_min < self.x_max
            && self.y_min < self.y_max
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: usize,
    pub category: String,
    /// Attribute name to value; absent keys are attributes the object lacks.
    pub attributes: BTreeMap<String, String>,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
}

impl SceneObject {
    fn signature(&self) -> (&str, &BTreeMap<String, String>) {
        (&self.category, &self.attributes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub id: String,
    pub split: Split,
    pub objects: Vec<SceneObject>,
}

impl Scene {
    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Checks the structural invariants against `cfg`.
    pub fn validate(&self, cfg: &WorldConfig) -> Result<()> {
        if self.objects.len() < 2 || self.objects.len() > cfg.max_objects {
            return Err(Error::InvalidScene(format!(
                "scene {} has {} objects, expected 2..={}",
                self.id,
                self.objects.len(),
                cfg.max_objects
            )));
        }
        for (i, obj) in self.objects.iter().enumerate() {
            if obj.id != i {
                return Err(Error::InvalidScene(format!("object ids must be 0..N in order, found {} at {i}", obj.id)));
            }
            if !obj.bbox.is_valid() {
                return Err(Error::InvalidScene(format!("object {i} has an invalid box")));
            }
            if !cfg.categories.contains(&obj.category) {
                return Err(Error::InvalidScene(format!("object {i} has unknown category `{}`", obj.category)));
            }
            for (name, value) in &obj.attributes {
                let known = cfg.attribute(name).is_some_and(|a| a.values.contains(value));
                if !known {
                    return Err(Error::InvalidScene(format!("object {i} has undeclared attribute {name}={value}")));
                }
            }
        }
        if is_degenerate(&self.objects) {
            return Err(Error::InvalidScene(format!("scene {} is fully degenerate", self.id)));
        }
        Ok(())
    }
}

fn is_degenerate(objects: &[SceneObject]) -> bool {
    objects.windows(2).all(|w| w[0].signature() == w[1].signature())
}

/// A scene with one object assigned as the target.
#[derive(Debug, Clone)]
pub struct GameInstance {
    pub scene: Arc<Scene>,
    pub target_id: usize,
}

fn sample_object(cfg: &WorldConfig, id: usize, rng: &mut crate::seed::Rng) -> SceneObject {
    let category = cfg.categories[rng.random_range(0..cfg.categories.len())].clone();
    let mut attributes = BTreeMap::new();
    for attr in &cfg.attributes {
        // Draw the presence coin and the value unconditionally so that the
        // stream position does not depend on presence outcomes.
        let present = rng.random::<f64>() < attr.presence;
        let value = &attr.values[rng.random_range(0..attr.values.len())];
        if present {
            attributes.insert(attr.name.clone(), value.clone());
        }
    }
    let w = rng.random_range(cfg.min_box_size..=cfg.max_box_size);
    let h = rng.random_range(cfg.min_box_size..=cfg.max_box_size);
    let cx: f64 = rng.random();
    let cy: f64 = rng.random();
    let bbox = BoundingBox {
        x_min: (cx - w / 2.0).max(0.0),
        y_min: (cy - h / 2.0).max(0.0),
        x_max: (cx + w / 2.0).min(1.0),
        y_max: (cy + h / 2.0).min(1.0),
    };
    SceneObject { id, category, attributes, bbox }
}

/// Generates one scene. Identical `(cfg, seed)` always yields an identical scene.
pub fn generate_scene(cfg: &WorldConfig, seed: u64) -> Result<Scene> {
    cfg.validate()?;
    for attempt in 0..cfg.max_resample {
        let mut rng = rng_for(seed, "scene", &[attempt as u64]);
        let n = rng.random_range(cfg.min_objects..=cfg.max_objects);
        let objects: Vec<_> = (0..n).map(|id| sample_object(cfg, id, &mut rng)).collect();
        if !is_degenerate(&objects) {
            return Ok(Scene {
                id: format!("scene-{seed:016x}"),
                split: Split::Train,
                objects,
            });
        }
    }
    Err(Error::DegenerateConfig {
        attempts: cfg.max_resample,
    })
}

/// Picks a uniformly random target object.
pub fn assign_target(scene: &Arc<Scene>, seed: u64) -> Result<GameInstance> {
    if scene.is_empty() {
        return Err(Error::InvalidScene(format!("scene {} has no objects", scene.id)));
    }
    let mut rng = rng_from_seed(seed);
    Ok(GameInstance {
        scene: Arc::clone(scene),
        target_id: rng.random_range(0..scene.len()),
    })
}

/// `[x_min, y_min, x_max, y_max, x_center, y_center, w_box, h_box]`.
pub fn spatial_vector(obj: &SceneObject) -> [f64; 8] {
    let b = &obj.bbox;
    let (xc, yc) = b.center();
    [b.x_min, b.y_min, b.x_max, b.y_max, xc, yc, b.x_max - b.x_min, b.y_max - b.y_min]
}

pub fn make_splits(
    n_train: usize,
    n_test: usize,
    cfg: &WorldConfig,
    seed: u64,
) -> Result<(Vec<Scene>, Vec<Scene>)> {
    if n_train == 0 || n_test == 0 {
        return Err(Error::config("world.n_train_scenes", "split sizes must be >= 1"));
    }
    let build = |split: Split, n: usize| -> Result<Vec<Scene>> {
        (0..n)
            .map(|i| {
                let tag = match split {
                    Split::Train => "train",
                    Split::Test => "test",
                };
                let mut scene = generate_scene(cfg, derive_seed(seed, "world", &[split as u64, i as u64]))?;
                scene.id = format!("{tag}-{i:06}");
                scene.split = split;
                Ok(scene)
            })
            .collect()
    };
    Ok((build(Split::Train, n_train)?, build(Split::Test, n_test)?))
}

/// Object ids of a training scene reserved for NewObject evaluation.
pub fn held_out_objects(scene: &Scene, count: usize, seed: u64) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..scene.len()).collect();
    // Keyed by scene id so the holdout does not depend on list order.
    let mut rng = rng_for(derive_seed(seed, "new-object-holdout", &[]), &scene.id, &[]);
    ids.shuffle(&mut rng);
    let mut held: Vec<usize> = ids.into_iter().take(count.min(scene.len().saturating_sub(1))).collect();
    held.sort_unstable();
    held
}

/// Object ids of a training scene that may be drawn as training targets.
pub fn trainable_objects(scene: &Scene, holdout: usize, seed: u64) -> Vec<usize> {
    let held = held_out_objects(scene, holdout, seed);
    (0..scene.len()).filter(|i| !held.contains(i)).collect()
}

/// Per-scene record of every target used during training.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TargetLog {
    pub targets: BTreeMap<String, BTreeSet<usize>>,
}

impl TargetLog {
    pub fn record(&mut self, scene_id: &str, target: usize) {
        self.targets.entry(scene_id.to_string()).or_default().insert(target);
    }

    pub fn contains(&self, scene_id: &str, target: usize) -> bool {
        self.targets.get(scene_id).is_some_and(|s| s.contains(&target))
    }

    pub fn merge(&mut self, other: &TargetLog) {
        for (scene, ids) in &other.targets {
            self.targets.entry(scene.clone()).or_default().extend(ids);
        }
    }
}
