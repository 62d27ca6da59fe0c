use crate::error::Result;
use crate::seed::derive_seed;
use crate::world::{held_out_objects, make_splits, Scene, WorldConfig};

/// Train and test scenes, with each training scene's objects split into
/// those usable as training targets and those reserved for NewObject.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<Scene>,
    pub test: Vec<Scene>,
    pub trainable: Vec<Vec<usize>>,
    pub held_out: Vec<Vec<usize>>,
}

impl Dataset {
    pub fn generate(cfg: &WorldConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let world_seed = derive_seed(seed, "dataset", &[]);
        let (train, test) = make_splits(cfg.n_train_scenes, cfg.n_test_scenes, cfg, world_seed)?;
        Ok(Self::from_scenes(train, test, cfg.new_object_holdout, seed))
    }

    pub fn from_scenes(train: Vec<Scene>, test: Vec<Scene>, holdout: usize, seed: u64) -> Self {
        let held_out: Vec<Vec<usize>> = train.iter().map(|s| held_out_objects(s, holdout, seed)).collect();
        let trainable = train
            .iter()
            .zip(&held_out)
            .map(|(s, h)| (0..s.len()).filter(|i| !h.contains(i)).collect())
            .collect();
        Dataset {
            train,
            test,
            trainable,
            held_out,
        }
    }
}
