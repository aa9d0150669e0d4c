use std::time::Duration;

use async_trait::async_trait;
use reqwest::header::RETRY_AFTER;
use reqwest::StatusCode;
use serde::Deserialize;

use super::{BackendMode, SearchBackend, WikiError};

pub const DEFAULT_API_URL: &str = "https://en.wikipedia.org/w/api.php";

/// MediaWiki Action API backend: `list=search` for search and
/// `prop=extracts&explaintext` for article text.
#[derive(Debug, Clone)]
pub struct MediaWikiBackend {
    api_url: String,
    http: reqwest::Client,
}

#[derive(Deserialize)]
struct ApiResponse<Q> {
    query: Option<Q>,
    error: Option<ApiError>,
}

#[derive(Deserialize)]
struct ApiError {
    code: String,
    #[serde(default)]
    info: String,
}

#[derive(Deserialize)]
struct SearchQuery {
    #[serde(default)]
    search: Vec<SearchHit>,
}

#[derive(Deserialize)]
struct SearchHit {
    title: String,
}

#[derive(Deserialize)]
struct ExtractQuery {
    #[serde(default)]
    pages: Vec<ExtractPage>,
}

#[derive(Deserialize)]
struct ExtractPage {
    #[serde(default)]
    missing: bool,
    #[serde(default)]
    invalid: bool,
    extract: Option<String>,
}

impl MediaWikiBackend {
    pub fn new(api_url: impl Into<String>) -> Result<MediaWikiBackend, WikiError> {
        let http = reqwest::Client::builder()
            .user_agent(concat!("wikicheck/", env!("CARGO_PKG_VERSION")))
            .timeout(Duration::from_secs(20))
            .build()
            .map_err(|e| WikiError::Backend(e.to_string()))?;
        Ok(MediaWikiBackend {
            api_url: api_url.into(),
            http,
        })
    }

    pub fn api_url(&self) -> &str {
        &self.api_url
    }

    async fn call<Q: for<'de> Deserialize<'de>>(&self, params: &[(&str, &str)]) -> Result<Option<Q>, WikiError> {
        let response = self
            .http
            .get(&self.api_url)
            .query(&[("action", "query"), ("format", "json"), ("formatversion", "2")])
            .query(params)
            .send()
            .await
            .map_err(|e| WikiError::Network(e.to_string()))?;

        let status = response.status();
        if status == StatusCode::TOO_MANY_REQUESTS {
            let retry_after = response
                .headers()
                .get(RETRY_AFTER)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse().ok());
            return Err(WikiError::RateLimited { retry_after });
        }
        if status.is_server_error() {
            return Err(WikiError::Network(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(WikiError::Backend(format!("HTTP {status}")));
        }
        let body: ApiResponse<Q> = response
            .json()
            .await
            .map_err(|e| WikiError::Backend(format!("malformed response: {e}")))?;
        if let Some(err) = body.error {
            if err.code == "ratelimited" {
                return Err(WikiError::RateLimited { retry_after: None });
            }
            return Err(WikiError::Backend(format!("{}: {}", err.code, err.info)));
        }
        Ok(body.query)
    }
}

#[async_trait]
impl SearchBackend for MediaWikiBackend {
    fn mode(&self) -> BackendMode {
        BackendMode::Live
    }

    async fn search(&self, query: &str, limit: usize) -> Result<Vec<String>, WikiError> {
        let limit = limit.to_string();
        let q: Option<SearchQuery> = self
            .call(&[
                ("list", "search"),
                ("srsearch", query),
                ("srlimit", &limit),
                ("srprop", ""),
            ])
            .await?;
        Ok(q.map(|q| q.search.into_iter().map(|h| h.title).collect())
            .unwrap_or_default())
    }

    async fn get_text(&self, title: &str) -> Result<Option<String>, WikiError> {
        let q: Option<ExtractQuery> = self
            .call(&[
                ("prop", "extracts"),
                ("explaintext", "1"),
                ("exsectionformat", "plain"),
                ("redirects", "1"),
                ("titles", title),
            ])
            .await?;
        let page = q.and_then(|q| q.pages.into_iter().next());
        Ok(match page {
            Some(p) if !p.missing && !p.invalid => p.extract,
            _ => None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use axum::extract::Query;
    use axum::http::{HeaderMap, StatusCode as AxStatus};
    use axum::response::IntoResponse;
    use axum::routing::get;
    use axum::{Json, Router};
    use serde_json::json;
    use std::collections::HashMap;

    async fn api(Query(p): Query<HashMap<String, String>>) -> axum::response::Response {
        assert_eq!(p["action"], "query");
        assert_eq!(p["format"], "json");
        if p.get("list").map(String::as_str) == Some("search") {
            return match p["srsearch"].as_str() {
                "slow down" => {
                    let mut h = HeaderMap::new();
                    h.insert("retry-after", "7".parse().unwrap());
                    (AxStatus::TOO_MANY_REQUESTS, h, "").into_response()
                }
                "explode" => (AxStatus::BAD_GATEWAY, "").into_response(),
                "bad param" => Json(json!({"error": {"code": "badvalue", "info": "nope"}})).into_response(),
                q => {
                    let n: usize = p["srlimit"].parse().unwrap();
                    let hits: Vec<_> = ["Mogadishu", "Battle of Mogadishu", "Somalia"]
                        .iter()
                        .filter(|_| q == "Mogadishu")
                        .take(n)
                        .map(|t| json!({"ns": 0, "title": t}))
                        .collect();
                    Json(json!({"batchcomplete": true, "query": {"search": hits}})).into_response()
                }
            };
        }
        assert_eq!(p["prop"], "extracts");
        assert_eq!(p["explaintext"], "1");
        let page = match p["titles"].as_str() {
            "Mogadishu" => {
                json!({"pageid": 1, "title": "Mogadishu", "extract": "Mogadishu is the capital of Somalia."})
            }
            t => json!({"title": t, "missing": true}),
        };
        Json(json!({"query": {"pages": [page]}})).into_response()
    }

    async fn serve() -> String {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(async move {
            axum::serve(listener, Router::new().route("/w/api.php", get(api)))
                .await
                .unwrap();
        });
        format!("http://{addr}/w/api.php")
    }

    #[tokio::test]
    async fn speaks_action_api() {
        let b = MediaWikiBackend::new(serve().await).unwrap();
        assert_eq!(
            b.search("Mogadishu", 2).await.unwrap(),
            ["Mogadishu", "Battle of Mogadishu"]
        );
        assert!(b.search("zzqx-nonexistent", 10).await.unwrap().is_empty());
        assert_eq!(
            b.get_text("Mogadishu").await.unwrap().as_deref(),
            Some("Mogadishu is the capital of Somalia.")
        );
        assert_eq!(b.get_text("NoSuchPageXYZ").await.unwrap(), None);
    }

    #[tokio::test]
    async fn maps_failures() {
        let b = MediaWikiBackend::new(serve().await).unwrap();
        assert_eq!(
            b.search("slow down", 3).await,
            Err(WikiError::RateLimited { retry_after: Some(7) })
        );
        assert!(matches!(b.search("explode", 3).await, Err(WikiError::Network(_))));
        assert!(matches!(b.search("bad param", 3).await, Err(WikiError::Backend(_))));
        let dead = MediaWikiBackend::new("http://127.0.0.1:9/w/api.php").unwrap();
        assert!(matches!(dead.search("x", 1).await, Err(WikiError::Network(_))));
    }
}
