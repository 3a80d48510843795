use std::time::Duration;

/// Service settings, read from `MOULDPRINT_*` environment variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub port: u16,
    pub max_upload_bytes: usize,
    /// Sessions idle this long are dropped with their caches.
    pub session_ttl: Duration,
    /// Upper bound on concurrently running TV flows.
    pub workers: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            port: 8080,
            max_upload_bytes: 100 * 1024 * 1024,
            session_ttl: Duration::from_secs(3600),
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

fn parse<T: std::str::FromStr>(name: &str, value: Option<String>) -> Result<Option<T>, String> {
    value
        .map(|v| v.trim().parse::<T>().map_err(|_| format!("{name}: cannot parse `{v}`")))
        .transpose()
}

impl ServiceConfig {
    pub const PORT: &'static str = "MOULDPRINT_PORT";
    pub const MAX_UPLOAD_MB: &'static str = "MOULDPRINT_MAX_UPLOAD_MB";
    pub const SESSION_TTL_SECS: &'static str = "MOULDPRINT_SESSION_TTL_SECS";
    pub const WORKERS: &'static str = "MOULDPRINT_WORKERS";

    pub fn from_env() -> Result<Self, String> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, String> {
        let d = Self::default();
        let workers = parse::<usize>(Self::WORKERS, get(Self::WORKERS))?.unwrap_or(d.workers);
        if workers == 0 {
            return Err(format!("{}: must be at least 1", Self::WORKERS));
        }
        Ok(Self {
            port: parse(Self::PORT, get(Self::PORT))?.unwrap_or(d.port),
            max_upload_bytes: parse::<usize>(Self::MAX_UPLOAD_MB, get(Self::MAX_UPLOAD_MB))?
                .map_or(d.max_upload_bytes, |mb| mb * 1024 * 1024),
            session_ttl: parse::<u64>(Self::SESSION_TTL_SECS, get(Self::SESSION_TTL_SECS))?
                .map_or(d.session_ttl, Duration::from_secs),
            workers,
        })
    }
}
