//! Optional client for map-data services that serve street networks in the
//! GeoJSON dialect read by [`parse_street_graph`].

use std::path::Path;
use std::time::Duration;

use super::street::parse_street_graph;
use super::{Loaded, StreetGraph};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl BoundingBox {
    pub fn new(min_lon: f64, min_lat: f64, max_lon: f64, max_lat: f64) -> Result<Self> {
        let b = BoundingBox {
            min_lon,
            min_lat,
            max_lon,
            max_lat,
        };
        b.validate()?;
        Ok(b)
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.min_lon, self.min_lat, self.max_lon, self.max_lat]
            .iter()
            .all(|v| v.is_finite());
        if !finite
            || self.min_lon >= self.max_lon
            || self.min_lat >= self.max_lat
            || self.min_lon < -180.0
            || self.max_lon > 180.0
            || self.min_lat < -90.0
            || self.max_lat > 90.0
        {
            return Err(Error::InvalidArgument(format!("invalid bounding box {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FetchOptions {
    pub attempts: u32,
    /// Delay before the second attempt; doubles on every further retry.
    pub initial_backoff: Duration,
    pub max_bytes: u64,
    pub timeout: Duration,
}

impl Default for FetchOptions {
    fn default() -> Self {
        FetchOptions {
            attempts: 3,
            initial_backoff: Duration::from_millis(500),
            max_bytes: 512 * 1024 * 1024,
            timeout: Duration::from_secs(120),
        }
    }
}

/// Downloads `endpoint?bbox=min_lon,min_lat,max_lon,max_lat`, checks that the
/// body parses as a street graph and writes it to `out`.
///
/// Transport failures, 429 and 5xx responses are retried with exponential
/// backoff; other HTTP errors fail immediately.
pub fn fetch_street_network(
    bbox: BoundingBox,
    endpoint: &str,
    out: impl AsRef<Path>,
    opts: &FetchOptions,
) -> Result<Loaded<StreetGraph>> {
    bbox.validate()?;
    let sep = if endpoint.contains('?') { '&' } else { '?' };
    let url = format!(
        "{endpoint}{sep}bbox={},{},{},{}",
        bbox.min_lon, bbox.min_lat, bbox.max_lon, bbox.max_lat
    );
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(opts.timeout))
        .build()
        .into();

    let attempts = opts.attempts.max(1);
    let mut backoff = opts.initial_backoff;
    let mut last_err = String::new();
    for attempt in 1..=attempts {
        match agent.get(&url).call() {
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                if (200..300).contains(&status) {
                    if let Some(len) = resp.body().content_length() {
                        if len > opts.max_bytes {
                            return Err(Error::Size { cap: opts.max_bytes });
                        }
                    }
                    let body = match resp.body_mut().with_config().limit(opts.max_bytes).read_to_vec() {
                        Ok(b) => b,
                        Err(ureq::Error::BodyExceedsLimit(_)) => return Err(Error::Size { cap: opts.max_bytes }),
                        Err(e) => {
                            last_err = e.to_string();
                            log::warn!("fetch attempt {attempt}/{attempts} failed reading body: {e}");
                            sleep_before_retry(attempt, attempts, &mut backoff);
                            continue;
                        }
                    };
                    return finish(&body, &url, out.as_ref());
                }
                last_err = format!("HTTP {status}");
                if status != 429 && status < 500 {
                    return Err(Error::Fetch(format!("{url}: {last_err}")));
                }
            }
            Err(e) => last_err = e.to_string(),
        }
        log::warn!("fetch attempt {attempt}/{attempts} failed: {last_err}");
        sleep_before_retry(attempt, attempts, &mut backoff);
    }
    Err(Error::Fetch(format!("{url}: {last_err} after {attempts} attempts")))
}

fn sleep_before_retry(attempt: u32, attempts: u32, backoff: &mut Duration) {
    if attempt < attempts {
        std::thread::sleep(*backoff);
        *backoff *= 2;
    }
}

fn finish(body: &[u8], url: &str, out: &Path) -> Result<Loaded<StreetGraph>> {
    let text = std::str::from_utf8(body).map_err(|e| Error::Fetch(format!("{url}: body is not UTF-8: {e}")))?;
    let graph = parse_street_graph(text, url)?;
    let tmp = out.with_extension("part");
    std::fs::write(&tmp, body).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, out).map_err(|e| Error::io(out, e))?;
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    const BODY: &str = r#"{"type":"FeatureCollection","features":[{"type":"Feature","geometry":{"type":"LineString","coordinates":[[0,0],[0.001,0]]},"properties":{"highway":"cycleway"}}]}"#;

    /// Serves `responses` in order, one per connection.
    fn serve(responses: Vec<(u16, String)>) -> (String, Arc<AtomicUsize>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let hits = Arc::new(AtomicUsize::new(0));
        let counter = hits.clone();
        std::thread::spawn(move || {
            for (status, body) in responses {
                let Ok((mut stream, _)) = listener.accept() else { return };
                counter.fetch_add(1, Ordering::SeqCst);
                let mut buf = [0u8; 4096];
                let _ = stream.read(&mut buf);
                let reply = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.write_all(reply.as_bytes());
            }
        });
        (format!("http://{addr}/network"), hits)
    }

    fn quick() -> FetchOptions {
        FetchOptions {
            initial_backoff: Duration::from_millis(5),
            timeout: Duration::from_secs(5),
            ..FetchOptions::default()
        }
    }

    fn bbox() -> BoundingBox {
        BoundingBox::new(-0.01, -0.01, 0.01, 0.01).unwrap()
    }

    #[test]
    fn canned_response_is_written_and_loadable() {
        let (url, _) = serve(vec![(200, BODY.into())]);
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("net.geojson");
        let g = fetch_street_network(bbox(), &url, &out, &quick()).unwrap().value;
        assert_eq!(g.edges().len(), 1);
        let reloaded = super::super::load_street_graph(&out).unwrap().value;
        assert_eq!(reloaded.nodes(), g.nodes());
    }

    #[test]
    fn retries_then_succeeds() {
        let (url, hits) = serve(vec![(503, "busy".into()), (200, BODY.into())]);
        let dir = tempfile::tempdir().unwrap();
        fetch_street_network(bbox(), &url, dir.path().join("n.geojson"), &quick()).unwrap();
        assert_eq!(hits.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn three_503s_is_fetch_error() {
        let (url, hits) = serve(vec![(503, "x".into()), (503, "x".into()), (503, "x".into())]);
        let dir = tempfile::tempdir().unwrap();
        let err = fetch_street_network(bbox(), &url, dir.path().join("n.geojson"), &quick()).unwrap_err();
        assert!(matches!(err, Error::Fetch(_)), "{err}");
        assert_eq!(hits.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn client_error_is_not_retried() {
        let (url, hits) = serve(vec![(404, "no".into()), (200, BODY.into())]);
        let dir = tempfile::tempdir().unwrap();
        assert!(fetch_street_network(bbox(), &url, dir.path().join("n.geojson"), &quick()).is_err());
        assert_eq!(hits.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn oversized_body_is_size_error() {
        let (url, _) = serve(vec![(200, BODY.into())]);
        let dir = tempfile::tempdir().unwrap();
        let opts = FetchOptions { max_bytes: 16, ..quick() };
        let err = fetch_street_network(bbox(), &url, dir.path().join("n.geojson"), &opts).unwrap_err();
        assert!(matches!(err, Error::Size { cap: 16 }));
    }

    #[test]
    fn inverted_bbox_rejected() {
        assert!(matches!(BoundingBox::new(1.0, 0.0, 0.0, 1.0), Err(Error::InvalidArgument(_))));
        let bad = BoundingBox {
            min_lon: 0.0,
            min_lat: 2.0,
            max_lon: 1.0,
            max_lat: 1.0,
        };
        let err = fetch_street_network(bad, "http://127.0.0.1:9", "/nonexistent/x", &quick()).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }
}
