//! Session bookkeeping for the human-guesser study. Game semantics are left
//! to the core crate: every request rebuilds the game by replaying the
//! session's recorded actions.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use vqg_core::checkpoint::Checkpoint;
use vqg_core::config::{Config, CODE_VERSION};
use vqg_core::eval::study::{read_ledger, summarize, LedgerRecord, StudySummary};
use vqg_core::eval::{Agent, PolicyAgent};
use vqg_core::game::{Game, GameSetup, Transition};
use vqg_core::questioner::{DecodeMode, Policy, TokenId};
use vqg_core::seed::{derive_seed, rng_for};
use vqg_core::world::{assign_target, generate_scene, Scene, SceneObject, WorldConfig};

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl From<vqg_core::Error> for StudyError {
    fn from(e: vqg_core::Error) -> Self {
        StudyError::Internal(e.to_string())
    }
}

impl From<std::io::Error> for StudyError {
    fn from(e: std::io::Error) -> Self {
        StudyError::Internal(e.to_string())
    }
}

pub type StudyResult<T> = Result<T, StudyError>;

/// A questioner loaded from a checkpoint, with the game rules it was
/// trained under.
pub struct Questioner {
    pub setup: GameSetup,
    pub policy: Policy,
    pub world: WorldConfig,
    pub config_hash: String,
}

impl Questioner {
    pub fn from_checkpoint(ck: &Checkpoint) -> vqg_core::Result<Self> {
        let cfg: Config = ck.config()?;
        Ok(Questioner {
            setup: GameSetup {
                grammar: Arc::new(ck.grammar()?),
                oracle: cfg.oracle,
                rewards: cfg.rewards,
            },
            policy: ck.policy.clone(),
            world: cfg.world.clone(),
            config_hash: ck.header.config_hash.clone(),
        })
    }
}

/// Loads every `*.ckpt` file in `dir`, keyed by file stem.
pub fn load_checkpoints(dir: &Path) -> vqg_core::Result<BTreeMap<String, Questioner>> {
    let mut out = BTreeMap::new();
    if !dir.exists() {
        return Err(vqg_core::Error::NotFound(dir.to_path_buf()));
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ckpt"))
        .collect();
    paths.sort();
    for p in paths {
        let id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        out.insert(id, Questioner::from_checkpoint(&Checkpoint::load(&p)?)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Active,
    Guessed,
    Expired,
}

struct Session {
    checkpoint: String,
    group: Option<String>,
    scene: Arc<Scene>,
    target: usize,
    seed: u64,
    mode: DecodeMode,
    actions: Vec<TokenId>,
    status: Status,
    guess: Option<usize>,
    created_ms: u64,
    last_active_ms: u64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub checkpoint: String,
    pub scene_seed: u64,
    #[serde(default)]
    pub session_seed: Option<u64>,
    #[serde(default)]
    pub group: Option<String>,
    #[serde(default)]
    pub decode: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneView {
    pub id: String,
    pub objects: Vec<SceneObject>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundView {
    pub round: usize,
    pub question: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub checkpoint: String,
    pub group: Option<String>,
    pub status: Status,
    pub j_max: usize,
    pub scene: SceneView,
    pub transcript: Vec<RoundView>,
    /// The dialog has ended; only a guess remains.
    pub finished: bool,
    /// Present only after the guess.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_id: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepView {
    /// `None` when the questioner ended the dialog without a new question.
    pub round: Option<RoundView>,
    pub finished: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuessView {
    pub correct: bool,
    pub target_id: usize,
    pub rounds_seen: usize,
}

pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64))
}

pub struct StudyOptions {
    pub ledger: PathBuf,
    pub ttl: Duration,
    pub default_mode: DecodeMode,
    /// Seeds session ids and default session seeds.
    pub seed: u64,
}

pub struct Study {
    questioners: BTreeMap<String, Questioner>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    ledger_lock: Mutex<()>,
    counter: AtomicU64,
    clock: Clock,
    opts: StudyOptions,
}

fn transcript(game: &Game<'_>, q: &Questioner) -> Vec<RoundView> {
    game.rounds()
        .iter()
        .enumerate()
        .map(|(i, r)| RoundView {
            round: i + 1,
            question: q.setup.grammar.vocab().render(&r.tokens),
            answer: r.answer.to_string(),
        })
        .collect()
}

impl Study {
    pub fn new(questioners: BTreeMap<String, Questioner>, opts: StudyOptions, clock: Clock) -> Self {
        Study {
            questioners,
            sessions: Mutex::new(HashMap::new()),
            ledger_lock: Mutex::new(()),
            counter: AtomicU64::new(0),
            clock,
            opts,
        }
    }

    pub fn checkpoints(&self) -> Vec<String> {
        self.questioners.keys().cloned().collect()
    }

    fn questioner(&self, id: &str) -> StudyResult<&Questioner> {
        self.questioners
            .get(id)
            .ok_or_else(|| StudyError::NotFound(format!("unknown checkpoint `{id}`")))
    }

    fn session(&self, id: &str) -> StudyResult<Arc<Mutex<Session>>> {
        let now = (self.clock)();
        let ttl = self.opts.ttl.as_millis() as u64;
        let mut map = self.sessions.lock().unwrap();
        // Drop sessions that have been expired for a further full period.
        map.retain(|_, s| now.saturating_sub(s.lock().unwrap().last_active_ms) < 2 * ttl);
        let s = map
            .get(id)
            .cloned()
            .ok_or_else(|| StudyError::NotFound(format!("unknown session `{id}`")))?;
        {
            let mut g = s.lock().unwrap();
            if g.status == Status::Active && now.saturating_sub(g.last_active_ms) >= ttl {
                g.status = Status::Expired;
            }
        }
        Ok(s)
    }

    fn replay<'a>(&self, q: &'a Questioner, s: &'a Session) -> StudyResult<Game<'a>> {
        let mut game = Game::new(&q.setup, &s.scene, s.target, s.seed)?;
        for &a in &s.actions {
            game.step(a)?;
        }
        Ok(game)
    }

    fn view(&self, id: &str, s: &Session) -> StudyResult<SessionView> {
        let q = self.questioner(&s.checkpoint)?;
        let game = self.replay(q, s)?;
        let revealed = s.status == Status::Guessed;
        Ok(SessionView {
            session_id: id.to_string(),
            checkpoint: s.checkpoint.clone(),
            group: s.group.clone(),
            status: s.status,
            j_max: q.setup.rewards.j_max,
            scene: SceneView {
                id: s.scene.id.clone(),
                objects: s.scene.objects.clone(),
            },
            transcript: transcript(&game, q),
            finished: game.is_finished(),
            target_id: revealed.then_some(s.target),
            correct: if revealed { s.guess.map(|g| g == s.target) } else { None },
        })
    }

    pub fn create(&self, req: CreateRequest) -> StudyResult<SessionView> {
        let q = self.questioner(&req.checkpoint)?;
        let mode = match &req.decode {
            Some(m) => m.parse().map_err(|_| StudyError::BadRequest(format!("unknown decode mode `{m}`")))?,
            None => self.opts.default_mode,
        };
        let n = self.counter.fetch_add(1, Ordering::SeqCst);
        let id = format!("{:016x}", derive_seed(self.opts.seed, "session-id", &[n]));
        let seed = req
            .session_seed
            .unwrap_or_else(|| derive_seed(self.opts.seed, "session-seed", &[n]));
        let scene = Arc::new(generate_scene(&q.world, req.scene_seed)?);
        let target = assign_target(&scene, derive_seed(seed, "target", &[]))?.target_id;
        let now = (self.clock)();
        let session = Session {
            checkpoint: req.checkpoint,
            group: req.group,
            scene,
            target,
            seed,
            mode,
            actions: Vec::new(),
            status: Status::Active,
            guess: None,
            created_ms: now,
            last_active_ms: now,
        };
        let view = self.view(&id, &session)?;
        self.sessions.lock().unwrap().insert(id, Arc::new(Mutex::new(session)));
        Ok(view)
    }

    pub fn get(&self, id: &str) -> StudyResult<SessionView> {
        let s = self.session(id)?;
        let g = s.lock().unwrap();
        self.view(id, &g)
    }

    pub fn step(&self, id: &str) -> StudyResult<StepView> {
        let s = self.session(id)?;
        let mut s = s.lock().unwrap();
        match s.status {
            Status::Active => {}
            Status::Guessed => return Err(StudyError::Conflict("session already guessed".into())),
            Status::Expired => return Err(StudyError::Conflict("session expired".into())),
        }
        let q = self.questioner(&s.checkpoint)?;
        let mut game = self.replay(q, &s)?;
        if game.is_finished() {
            return Err(StudyError::Conflict("dialog already finished".into()));
        }
        let round = game.rounds().len() as u64;
        let mut rng = rng_for(s.seed, "decode", &[round]);
        let agent = PolicyAgent {
            policy: &q.policy,
            mode: s.mode,
        };
        let tokens = agent.next_question(&game, &mut rng)?;
        let mut last = Transition::Extended;
        for &t in &tokens {
            last = game.step(t)?;
        }
        let added = game.rounds().len() as u64 > round;
        let view = StepView {
            round: added.then(|| transcript(&game, q).pop()).flatten(),
            finished: matches!(last, Transition::Finished(_)),
        };
        drop(game);
        s.actions.extend(tokens);
        s.last_active_ms = (self.clock)();
        Ok(view)
    }

    pub fn guess(&self, id: &str, object_id: usize) -> StudyResult<GuessView> {
        let s = self.session(id)?;
        let mut s = s.lock().unwrap();
        match s.status {
            Status::Active => {}
            Status::Guessed => return Err(StudyError::Conflict("guess already submitted".into())),
            Status::Expired => return Err(StudyError::Conflict("session expired".into())),
        }
        if object_id >= s.scene.len() {
            return Err(StudyError::BadRequest(format!(
                "object id {object_id} out of range for a scene with {} objects",
                s.scene.len()
            )));
        }
        let q = self.questioner(&s.checkpoint)?;
        let game = self.replay(q, &s)?;
        let rounds_seen = game.rounds().len();
        let finished = game.is_finished();
        drop(game);
        let now = (self.clock)();
        let record = LedgerRecord {
            session_id: id.to_string(),
            checkpoint: s.checkpoint.clone(),
            group: s.group.clone(),
            scene_id: s.scene.id.clone(),
            target: s.target,
            guess: object_id,
            correct: object_id == s.target,
            rounds_seen,
            dialog_finished: finished,
            created_at_ms: s.created_ms,
            guessed_at_ms: now,
            config_hash: q.config_hash.clone(),
            code_version: CODE_VERSION.to_string(),
        };
        self.append(&record)?;
        s.status = Status::Guessed;
        s.guess = Some(object_id);
        s.last_active_ms = now;
        Ok(GuessView {
            correct: record.correct,
            target_id: s.target,
            rounds_seen,
        })
    }

    fn append(&self, record: &LedgerRecord) -> StudyResult<()> {
        let mut line = serde_json::to_string(record).map_err(|e| StudyError::Internal(e.to_string()))?;
        line.push('\n');
        let _guard = self.ledger_lock.lock().unwrap();
        if let Some(dir) = self.opts.ledger.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let mut f = std::fs::OpenOptions::new().create(true).append(true).open(&self.opts.ledger)?;
        f.write_all(line.as_bytes())?;
        f.flush()?;
        Ok(())
    }

    /// Recounted from the ledger file on every call.
    pub fn summary(&self) -> StudyResult<StudySummary> {
        let _guard = self.ledger_lock.lock().unwrap();
        Ok(summarize(&read_ledger(&self.opts.ledger)?))
    }
}
