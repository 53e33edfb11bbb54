//! HTTP client for intensity feeds with an on-disk cache.
//!
//! The endpoint is queried as `GET <endpoint>?region=R&start=S&end=E` and
//! must answer with a feed document. Each successful response is stored as
//! one JSON file in the cache directory, named by the SHA-256 of its region,
//! window and payload digest. Files are written to a temporary name and
//! renamed into place, so readers only ever see complete entries.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::{sha256_hex, DEFAULT_FRESHNESS_S};
use super::feed::{series_from_doc, FeedDoc};
use super::{json_error, to_canonical_json, IngestError, Location};
use crate::grid::{IntensityEntry, IntensitySeries};

pub const CACHE_DIR_ENV: &str = "CARBONDEF_CACHE_DIR";
pub const DEFAULT_CACHE_DIR: &str = ".carbondef-cache";

/// `CARBONDEF_CACHE_DIR` if set and non-empty, else `default`.
pub fn cache_dir_from_env(default: impl Into<PathBuf>) -> PathBuf {
    match std::env::var_os(CACHE_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => default.into(),
    }
}

/// Half-open time window `[start, end)` in epoch seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: i64,
    pub end: i64,
}

impl Window {
    pub fn covers(&self, other: &Window) -> bool {
        self.start <= other.start && self.end >= other.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedCacheEntry {
    pub region: String,
    pub window: Window,
    pub fetched_at: i64,
    /// Hex SHA-256 of the response body.
    pub payload_digest: String,
    pub entries: Vec<IntensityEntry>,
}

impl FeedCacheEntry {
    pub fn file_name(&self) -> String {
        let key = format!(
            "{}\n{}\n{}\n{}",
            self.region, self.window.start, self.window.end, self.payload_digest
        );
        format!("{}.json", sha256_hex(key.as_bytes()))
    }
}

type Clock = Arc<dyn Fn() -> i64 + Send + Sync>;

fn system_clock() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0)
}

#[derive(Clone)]
pub struct FeedClient {
    endpoint: String,
    cache_dir: PathBuf,
    freshness_s: u64,
    strict_freshness: bool,
    bearer_token: Option<String>,
    clock: Clock,
    agent: ureq::Agent,
}

impl std::fmt::Debug for FeedClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FeedClient")
            .field("endpoint", &self.endpoint)
            .field("cache_dir", &self.cache_dir)
            .field("freshness_s", &self.freshness_s)
            .field("strict_freshness", &self.strict_freshness)
            .finish_non_exhaustive()
    }
}

impl FeedClient {
    pub fn new(endpoint: impl Into<String>, cache_dir: impl Into<PathBuf>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .build()
            .into();
        FeedClient {
            endpoint: endpoint.into(),
            cache_dir: cache_dir.into(),
            freshness_s: DEFAULT_FRESHNESS_S,
            strict_freshness: false,
            bearer_token: None,
            clock: Arc::new(system_clock),
            agent,
        }
    }

    pub fn with_freshness(mut self, freshness_s: u64) -> Self {
        self.freshness_s = freshness_s;
        self
    }

    /// Refuse to fall back to stale cache entries when the network fails.
    pub fn with_strict_freshness(mut self, strict: bool) -> Self {
        self.strict_freshness = strict;
        self
    }

    pub fn with_bearer_token(mut self, token: Option<String>) -> Self {
        self.bearer_token = token;
        self
    }

    /// Replaces the wall clock (epoch seconds) used for freshness checks.
    pub fn with_clock(mut self, clock: impl Fn() -> i64 + Send + Sync + 'static) -> Self {
        self.clock = Arc::new(clock);
        self
    }

    pub fn cache_dir(&self) -> &Path {
        &self.cache_dir
    }

    /// Intensity entries intersecting `window`, from cache when fresh.
    pub fn fetch_intensity(
        &self,
        region: &str,
        window: Window,
    ) -> Result<IntensitySeries, IngestError> {
        let now = (self.clock)();
        let cached = self.lookup(region, window);
        if let Some(entry) = &cached {
            if now - entry.fetched_at <= self.freshness_s as i64 {
                return self.serve(entry, window);
            }
        }
        match self.fetch_remote(region, window, now) {
            Ok(entry) => {
                self.store(&entry)?;
                self.serve(&entry, window)
            }
            Err(network) => match cached {
                Some(entry) if self.strict_freshness => Err(IngestError::StaleCache {
                    region: region.to_string(),
                    age_s: now - entry.fetched_at,
                    freshness_s: self.freshness_s,
                }),
                Some(entry) => self.serve(&entry, window),
                None => Err(network),
            },
        }
    }

    fn serve(
        &self,
        entry: &FeedCacheEntry,
        window: Window,
    ) -> Result<IntensitySeries, IngestError> {
        let series = series_from_doc(FeedDoc {
            region: entry.region.clone(),
            entries: entry.entries.clone(),
        })?;
        Ok(series.restricted_to(window.start, window.end))
    }

    /// Newest readable cache entry for `region` whose window covers `window`.
    pub fn lookup(&self, region: &str, window: Window) -> Option<FeedCacheEntry> {
        let dir = std::fs::read_dir(&self.cache_dir).ok()?;
        dir.filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .filter_map(|p| std::fs::read(&p).ok())
            .filter_map(|bytes| serde_json::from_slice::<FeedCacheEntry>(&bytes).ok())
            .filter(|e| e.region == region && e.window.covers(&window))
            .max_by_key(|e| e.fetched_at)
    }

    fn fetch_remote(
        &self,
        region: &str,
        window: Window,
        now: i64,
    ) -> Result<FeedCacheEntry, IngestError> {
        let url = format!(
            "{}?region={}&start={}&end={}",
            self.endpoint, region, window.start, window.end
        );
        let network = |message: String| IngestError::Network {
            url: url.clone(),
            message,
        };
        let mut request = self
            .agent
            .get(&self.endpoint)
            .query("region", region)
            .query("start", window.start.to_string())
            .query("end", window.end.to_string());
        if let Some(token) = &self.bearer_token {
            request = request.header("Authorization", format!("Bearer {token}"));
        }
        let mut response = request.call().map_err(|e| network(e.to_string()))?;
        let body = response
            .body_mut()
            .read_to_vec()
            .map_err(|e| network(e.to_string()))?;

        let doc: FeedDoc = serde_json::from_slice(&body).map_err(json_error)?;
        if doc.region != region {
            return Err(IngestError::Invalid {
                location: Location::Path("region".into()),
                message: format!(
                    "requested region {region}, feed answered for {}",
                    doc.region
                ),
            });
        }
        let series = series_from_doc(doc)?;
        Ok(FeedCacheEntry {
            region: region.to_string(),
            window,
            fetched_at: now,
            payload_digest: sha256_hex(&body),
            entries: series.entries().to_vec(),
        })
    }

    fn store(&self, entry: &FeedCacheEntry) -> Result<(), IngestError> {
        std::fs::create_dir_all(&self.cache_dir)
            .map_err(|e| IngestError::io(&self.cache_dir, e))?;
        let name = entry.file_name();
        let target = self.cache_dir.join(&name);
        let nonce = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.subsec_nanos())
            .unwrap_or(0);
        let tmp = self
            .cache_dir
            .join(format!(".{name}.{}.{nonce}.tmp", std::process::id()));
        std::fs::write(&tmp, to_canonical_json(entry)).map_err(|e| IngestError::io(&tmp, e))?;
        std::fs::rename(&tmp, &target).map_err(|e| {
            let _ = std::fs::remove_file(&tmp);
            IngestError::io(&target, e)
        })
    }
}

/// One-shot fetch with default freshness.
pub fn fetch_intensity(
    endpoint: &str,
    region: &str,
    window: Window,
    cache_dir: &Path,
) -> Result<IntensitySeries, IngestError> {
    FeedClient::new(endpoint, cache_dir).fetch_intensity(region, window)
}
