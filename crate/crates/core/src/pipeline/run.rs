//! Run execution: worker pool, ordered single writer, resume.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc, Condvar, Mutex};
use std::thread;
use std::time::Instant;

use serde::Serialize;

use super::{
    parse_records, AttributeOutcome, BackendInfo, Condition, Outcome, PredictionRecord, PromptTemplateSet,
    RunConfig, RunError, RunManifest, SalienceSource, DONE_FILE, DRY_RUN_FILE, MANIFEST_FILE, RECORDS_FILE,
    TELEMETRY_FILE,
};
use super::prompts::audit_exclusivity;
use crate::backend::{
    build_backend, Backend, BackendError, BackendKind, BackendSpec, CachedBackend, QueryRequest, QueryResponse,
    RateLimiter, ResponseCache, Role, Usage, ENV_CACHE_DIR,
};
use crate::corpus::{load_dataset, ArtworkRecord, AttributeId, Dataset, SalienceVector};
use crate::metrics::{token_count, AttrSet};
use crate::parse::{parse_final_response_as, parse_salience_response};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub resume: bool,
    /// Render and audit every prompt without querying any backend.
    pub dry_run: bool,
    /// Stop after writing this many records in this invocation, leaving the
    /// run incomplete.
    pub max_records: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunSummary {
    pub total: usize,
    /// Records already present when a resumed run started.
    pub skipped: usize,
    pub written: usize,
    pub complete: bool,
    /// Records carrying an artwork-level error or a failed final query.
    pub record_errors: usize,
    /// Dry run only: rendered prompts that failed the exclusivity audit.
    pub dry_run_violations: usize,
}

/// One rendered prompt from a dry run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DryRunEntry {
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub artwork_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attribute: Option<AttributeId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support: Option<AttrSet>,
    pub prompt: String,
    pub leaked: Vec<AttributeId>,
}

#[derive(Serialize)]
struct Telemetry {
    request_id: String,
    model_id: String,
    ok: bool,
    latency_ms: u64,
    cache_hit: bool,
    usage: Option<Usage>,
}

/// Counting semaphore bounding in-flight backend queries.
struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n),
            cv: Condvar::new(),
        }
    }

    fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        let mut free = self.free.lock().expect("semaphore poisoned");
        while *free == 0 {
            free = self.cv.wait(free).expect("semaphore poisoned");
        }
        *free -= 1;
        drop(free);
        let out = f();
        *self.free.lock().expect("semaphore poisoned") += 1;
        self.cv.notify_one();
        out
    }
}

enum Plan {
    Fabg {
        source: SalienceSource,
        attribute_prompts: Vec<String>,
        /// Indexed by `AttrSet::bits`.
        final_prompts: Vec<String>,
    },
    Baseline {
        role: Role,
        prompt: String,
    },
}

struct Ctx<'a> {
    dataset: &'a Dataset,
    image_base: PathBuf,
    plan: Plan,
    attribute_backends: Vec<Arc<dyn Backend>>,
    final_backend: Arc<dyn Backend>,
    permits: Semaphore,
}

fn resolve_image(base: &Path, image_ref: &str) -> String {
    if image_ref.contains("://") || image_ref.starts_with("data:") || Path::new(image_ref).is_absolute() {
        image_ref.to_string()
    } else {
        base.join(image_ref).to_string_lossy().into_owned()
    }
}

impl Ctx<'_> {
    fn query(
        &self,
        backend: &dyn Backend,
        art: &ArtworkRecord,
        role: Role,
        prompt: &str,
    ) -> (Result<QueryResponse, BackendError>, Telemetry) {
        let req = QueryRequest {
            request_id: format!("{}/{role}", art.id),
            artwork_id: art.id.clone(),
            image_ref: resolve_image(&self.image_base, &art.image_ref),
            prompt: prompt.to_string(),
            role,
        };
        let start = Instant::now();
        let res = self.permits.run(|| backend.query(&req));
        let tel = Telemetry {
            request_id: req.request_id,
            model_id: backend.model_id().to_string(),
            ok: res.is_ok(),
            latency_ms: res
                .as_ref()
                .map(|r| r.latency_ms)
                .unwrap_or_else(|_| start.elapsed().as_millis() as u64),
            cache_hit: res.as_ref().is_ok_and(|r| r.cache_hit),
            usage: res.as_ref().ok().and_then(|r| r.usage),
        };
        (res, tel)
    }

    fn fatal(art: &ArtworkRecord, role: Role, e: BackendError) -> RunError {
        RunError::Backend {
            request_id: format!("{}/{role}", art.id),
            source: e,
        }
    }

    fn final_stage(
        &self,
        art: &ArtworkRecord,
        role: Role,
        prompt: &str,
        telemetry: &mut Vec<Telemetry>,
    ) -> Result<(Outcome<crate::parse::FinalPrediction>, usize), RunError> {
        let (res, tel) = self.query(self.final_backend.as_ref(), art, role, prompt);
        telemetry.push(tel);
        Ok(match res {
            Ok(resp) => match parse_final_response_as(&resp.text, self.dataset.vocabulary(), &role.to_string()) {
                Ok(p) => {
                    let n = token_count(&p.delivered_text());
                    (Outcome::Parsed { raw: resp.text, value: p }, n)
                }
                Err(failure) => {
                    let n = token_count(&resp.text);
                    (Outcome::ParseFailed { raw: resp.text, failure }, n)
                }
            },
            Err(e) if e.is_fatal() => return Err(Self::fatal(art, role, e)),
            Err(e) => (Outcome::BackendFailed { message: e.to_string() }, 0),
        })
    }

    fn attribute_stage(
        &self,
        art: &ArtworkRecord,
        prompts: &[String],
        telemetry: &mut Vec<Telemetry>,
    ) -> Result<Vec<AttributeOutcome>, RunError> {
        let results: Vec<_> = thread::scope(|s| {
            let handles: Vec<_> = AttributeId::ALL
                .into_iter()
                .map(|a| {
                    let backend = self.attribute_backends[a.index()].as_ref();
                    let prompt = prompts[a.index()].as_str();
                    s.spawn(move || self.query(backend, art, Role::Attribute(a), prompt))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("query thread panicked")).collect()
        });
        let mut out = Vec::with_capacity(5);
        for (a, (res, tel)) in AttributeId::ALL.into_iter().zip(results) {
            telemetry.push(tel);
            let outcome = match res {
                Ok(resp) => match parse_salience_response(&resp.text, a) {
                    Ok(d) => Outcome::Parsed { raw: resp.text, value: d },
                    Err(failure) => Outcome::ParseFailed { raw: resp.text, failure },
                },
                Err(e) if e.is_fatal() => return Err(Self::fatal(art, Role::Attribute(a), e)),
                Err(e) => Outcome::BackendFailed { message: e.to_string() },
            };
            out.push(AttributeOutcome { attribute: a, outcome });
        }
        Ok(out)
    }

    fn process(&self, art: &ArtworkRecord, condition: Condition) -> Result<(PredictionRecord, Vec<Telemetry>), RunError> {
        let mut telemetry = Vec::new();
        let mut rec = PredictionRecord {
            artwork_id: art.id.clone(),
            condition,
            salience_source: None,
            attributes: Vec::new(),
            salience_vector: None,
            final_prompt: None,
            final_: Outcome::Skipped { reason: String::new() },
            final_token_count: 0,
            error: None,
        };
        match &self.plan {
            Plan::Baseline { role, prompt } => {
                let (outcome, n) = self.final_stage(art, *role, prompt, &mut telemetry)?;
                rec.final_ = outcome;
                rec.final_token_count = n;
            }
            Plan::Fabg {
                source,
                attribute_prompts,
                final_prompts,
            } => {
                rec.salience_source = Some(*source);
                let vector = match source {
                    SalienceSource::Gold => self.dataset.gold_salience(&art.id).copied(),
                    SalienceSource::Predicted => {
                        rec.attributes = self.attribute_stage(art, attribute_prompts, &mut telemetry)?;
                        let all_failed = rec
                            .attributes
                            .iter()
                            .all(|o| matches!(o.outcome, Outcome::BackendFailed { .. }));
                        (!all_failed).then(|| {
                            SalienceVector::from_set(rec.attributes.iter().filter(|o| o.salient()).map(|o| o.attribute).collect())
                        })
                    }
                };
                let Some(vector) = vector else {
                    let reason = match source {
                        SalienceSource::Gold => "no gold salience for this artwork",
                        SalienceSource::Predicted => "all five attribute queries failed",
                    };
                    rec.error = Some(reason.to_string());
                    rec.final_ = Outcome::Skipped { reason: reason.to_string() };
                    return Ok((rec, telemetry));
                };
                let prompt = &final_prompts[vector.support().bits() as usize];
                let (outcome, n) = self.final_stage(art, Role::Final, prompt, &mut telemetry)?;
                rec.salience_vector = Some(vector);
                rec.final_prompt = Some(prompt.clone());
                rec.final_ = outcome;
                rec.final_token_count = n;
            }
        }
        Ok((rec, telemetry))
    }
}

fn build_role_backend(
    cfg: &RunConfig,
    spec: &BackendSpec,
    key: &str,
    dataset: &Arc<Dataset>,
    limiter: &Option<Arc<RateLimiter>>,
    cache: &Option<Arc<ResponseCache>>,
) -> Result<Arc<dyn Backend>, RunError> {
    let mut spec = spec.clone();
    if let Some(o) = spec.oracle.as_mut() {
        o.seed.get_or_insert(cfg.run.seed);
    }
    let setup = |source| RunError::BackendSetup {
        role: key.to_string(),
        source,
    };
    let backend = build_backend(&spec, &cfg.base_dir, dataset, limiter.clone()).map_err(setup)?;
    // Fixture and oracle responses are already deterministic; caching them
    // under a shared model id could mix configurations.
    Ok(match (spec.kind, cache) {
        (BackendKind::Http, Some(c)) => Arc::new(CachedBackend::new(backend, Arc::clone(c))),
        _ => backend,
    })
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| RunError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| RunError::io(path, e))?;
    tmp.persist(path).map_err(|e| RunError::io(path, e.error))?;
    Ok(())
}

fn to_line<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string(v).expect("record serializes");
    s.push('\n');
    s
}

fn dry_run(
    cfg: &RunConfig,
    dataset: &Dataset,
    artworks: &[ArtworkRecord],
    templates: &PromptTemplateSet,
    out_dir: &Path,
) -> Result<RunSummary, RunError> {
    let vocab = dataset.vocabulary();
    let mut entries = Vec::new();
    let condition = cfg.condition.name;
    match condition.baseline_method() {
        Some(m) => entries.push(DryRunEntry {
            kind: "baseline",
            artwork_id: None,
            attribute: None,
            support: None,
            prompt: templates.baseline_prompt(m, vocab)?,
            leaked: Vec::new(),
        }),
        None => {
            for a in AttributeId::ALL {
                entries.push(DryRunEntry {
                    kind: "attribute",
                    artwork_id: None,
                    attribute: Some(a),
                    support: None,
                    prompt: templates.attribute_prompt(a)?,
                    leaked: Vec::new(),
                });
            }
            let gold_supports = artworks
                .iter()
                .filter_map(|r| dataset.gold_salience(&r.id).map(|s| (Some(r.id.clone()), s.support())));
            for (artwork_id, support) in AttrSet::every().map(|s| (None, s)).chain(gold_supports) {
                let prompt = templates.render_final(support, vocab)?;
                entries.push(DryRunEntry {
                    kind: "final",
                    artwork_id,
                    attribute: None,
                    support: Some(support),
                    leaked: audit_exclusivity(&prompt, support),
                    prompt,
                });
            }
        }
    }
    fs::create_dir_all(out_dir).map_err(|e| RunError::io(out_dir, e))?;
    let body: String = entries.iter().map(to_line).collect();
    write_atomic(&out_dir.join(DRY_RUN_FILE), body.as_bytes())?;
    Ok(RunSummary {
        total: entries.len(),
        dry_run_violations: entries.iter().filter(|e| !e.leaked.is_empty()).count(),
        ..Default::default()
    })
}

/// Runs (or resumes) the configured condition, writing the artifact to
/// `opts.out_dir`.
pub fn execute(cfg: &RunConfig, opts: &RunOptions) -> Result<RunSummary, RunError> {
    let manifest_path = cfg.resolve(&cfg.dataset.manifest);
    let dataset = Arc::new(load_dataset(&manifest_path)?);
    let limit = cfg.dataset.limit.unwrap_or(usize::MAX).min(dataset.len());
    let artworks = &dataset.artworks()[..limit];
    let templates = PromptTemplateSet::load(&cfg.prompts, &cfg.base_dir)?;
    let condition = cfg.condition.name;
    let source = cfg.condition.salience_source;
    if condition == Condition::Fabg && source == SalienceSource::Gold && !dataset.has_gold_salience() {
        return Err(RunError::MissingGold);
    }
    if opts.dry_run {
        return dry_run(cfg, &dataset, artworks, &templates, &opts.out_dir);
    }

    let vocab = dataset.vocabulary();
    let plan = match condition.baseline_method() {
        Some(m) => Plan::Baseline {
            role: Role::Baseline(m),
            prompt: templates.baseline_prompt(m, vocab)?,
        },
        None => Plan::Fabg {
            source,
            attribute_prompts: AttributeId::ALL
                .into_iter()
                .map(|a| templates.attribute_prompt(a))
                .collect::<Result<_, _>>()?,
            final_prompts: (0..32u8)
                .map(|b| templates.bottleneck_prompt(AttrSet::from_bits(b).expect("5-bit set"), vocab))
                .collect::<Result<_, _>>()?,
        },
    };

    let limiter = RateLimiter::per_minute(cfg.limits.requests_per_minute).map(Arc::new);
    let cache_dir = cfg
        .run
        .cache_dir
        .as_ref()
        .map(|p| cfg.resolve(p))
        .or_else(|| std::env::var_os(ENV_CACHE_DIR).map(PathBuf::from));
    let cache = match cache_dir {
        Some(d) => Some(Arc::new(ResponseCache::open(d).map_err(|source| RunError::BackendSetup {
            role: "cache".into(),
            source,
        })?)),
        None => None,
    };
    let mut built: BTreeMap<String, Arc<dyn Backend>> = BTreeMap::new();
    let mut backend_for = |key: &str, spec: &BackendSpec| -> Result<Arc<dyn Backend>, RunError> {
        if let Some(b) = built.get(key) {
            return Ok(Arc::clone(b));
        }
        let b = build_role_backend(cfg, spec, key, &dataset, &limiter, &cache)?;
        built.insert(key.to_string(), Arc::clone(&b));
        Ok(b)
    };
    let final_backend = backend_for("final", &cfg.backends["final"])?;
    let mut attribute_backends = Vec::new();
    if matches!(plan, Plan::Fabg { source: SalienceSource::Predicted, .. }) {
        for a in AttributeId::ALL {
            let (key, spec) = cfg.attribute_backend(a).expect("validated config");
            attribute_backends.push(backend_for(key, spec)?);
        }
    }
    let backends_info = built
        .keys()
        .map(|k| {
            let spec = &cfg.backends[k];
            let info = BackendInfo {
                model_id: spec.model_id.clone(),
                temperature: spec.sampling.temperature,
                max_tokens: spec.sampling.max_tokens,
            };
            (k.clone(), info)
        })
        .collect();

    // Output directory and resume state.
    let out = &opts.out_dir;
    let m_path = out.join(MANIFEST_FILE);
    let r_path = out.join(RECORDS_FILE);
    let t_path = out.join(TELEMETRY_FILE);
    let now = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let mut done = 0;
    if m_path.exists() {
        if !opts.resume {
            return Err(RunError::OutputExists(out.clone()));
        }
        let text = fs::read_to_string(&m_path).map_err(|e| RunError::io(&m_path, e))?;
        let mut manifest: RunManifest = serde_json::from_str(&text).map_err(|e| RunError::CorruptArtifact {
            path: m_path.clone(),
            line: e.line(),
            message: e.to_string(),
        })?;
        let digest = cfg.digest();
        if manifest.config_digest != digest {
            return Err(RunError::ConfigMismatch {
                expected: manifest.config_digest,
                found: digest,
            });
        }
        let text = match fs::read_to_string(&r_path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(RunError::io(&r_path, e)),
        };
        let (records, consumed) = parse_records(&text, &r_path)?;
        for (i, r) in records.iter().enumerate() {
            if artworks.get(i).map(|a| a.id.as_str()) != Some(r.artwork_id.as_str()) {
                return Err(RunError::CorruptArtifact {
                    path: r_path.clone(),
                    line: i + 1,
                    message: format!("record \"{}\" is out of dataset order", r.artwork_id),
                });
            }
        }
        if consumed < text.len() {
            let f = OpenOptions::new().write(true).open(&r_path).map_err(|e| RunError::io(&r_path, e))?;
            f.set_len(consumed as u64).map_err(|e| RunError::io(&r_path, e))?;
        }
        done = records.len();
        if out.join(DONE_FILE).exists() {
            return Ok(RunSummary {
                total: artworks.len(),
                skipped: done,
                complete: true,
                ..Default::default()
            });
        }
        manifest.resumed_at.push(now);
        write_atomic(&m_path, to_line(&manifest).as_bytes())?;
        log::info!("resuming after {done} of {} records", artworks.len());
    } else {
        fs::create_dir_all(out).map_err(|e| RunError::io(out, e))?;
        let manifest = RunManifest {
            condition,
            salience_source: (condition == Condition::Fabg).then_some(source),
            config_digest: cfg.digest(),
            config: cfg.clone(),
            dataset_name: dataset.name().to_string(),
            dataset_digest: dataset.digest().to_string(),
            n_artworks: artworks.len(),
            template_digests: templates.digests(),
            backends: backends_info,
            seed: cfg.run.seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: now,
            resumed_at: Vec::new(),
        };
        write_atomic(&m_path, to_line(&manifest).as_bytes())?;
        File::create(&r_path).map_err(|e| RunError::io(&r_path, e))?;
    }

    let open_append = |p: &Path| {
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(p)
            .map(BufWriter::new)
            .map_err(|e| RunError::io(p, e))
    };
    let mut records_out = open_append(&r_path)?;
    let mut telemetry_out = open_append(&t_path)?;

    let ctx = Ctx {
        dataset: &dataset,
        image_base: manifest_path.parent().map(Path::to_path_buf).unwrap_or_default(),
        plan,
        attribute_backends,
        final_backend,
        permits: Semaphore::new(cfg.limits.concurrency),
    };
    let pending = &artworks[done..];
    let budget = opts.max_records.unwrap_or(usize::MAX);
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let mut summary = RunSummary {
        total: artworks.len(),
        skipped: done,
        ..Default::default()
    };

    let outcome: Result<(), RunError> = thread::scope(|s| {
        let (tx, rx) = mpsc::channel();
        for _ in 0..cfg.limits.concurrency.min(pending.len()) {
            let tx = tx.clone();
            let (ctx, next, stop) = (&ctx, &next, &stop);
            s.spawn(move || loop {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(art) = pending.get(i) else { break };
                let res = ctx.process(art, condition);
                if tx.send((i, res)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut reorder = BTreeMap::new();
        let mut want = 0;
        let result = (|| {
            if budget == 0 {
                return Ok(());
            }
            for (i, res) in rx {
                reorder.insert(i, res);
                while let Some(res) = reorder.remove(&want) {
                    let (rec, tel) = res?;
                    if rec.error.is_some() || matches!(rec.final_, Outcome::BackendFailed { .. }) {
                        summary.record_errors += 1;
                    }
                    records_out
                        .write_all(to_line(&rec).as_bytes())
                        .and_then(|_| records_out.flush())
                        .map_err(|e| RunError::io(&r_path, e))?;
                    let tel: String = tel.iter().map(to_line).collect();
                    telemetry_out
                        .write_all(tel.as_bytes())
                        .and_then(|_| telemetry_out.flush())
                        .map_err(|e| RunError::io(&t_path, e))?;
                    want += 1;
                    summary.written += 1;
                    if summary.written >= budget {
                        return Ok(());
                    }
                }
            }
            Ok(())
        })();
        stop.store(true, Ordering::Relaxed);
        result
    });
    outcome?;

    if done + summary.written == artworks.len() {
        File::create(out.join(DONE_FILE)).map_err(|e| RunError::io(out, e))?;
        summary.complete = true;
    }
    Ok(summary)
}
