use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tablefill_core::columns::rank_labels;
use tablefill_core::retrieval::find_related_tables;
use tablefill_core::rows::suggest_rows;
use tablefill_core::{
    normalize_label, tokenize, Cell, CorpusTable, EntityRecord, IndexBundle, ScoringParams,
};
use tablefill_service::{router, AppState};
use tablefill_testkit::{random_seed, Fixture};
use tower::ServiceExt;

fn fixture() -> &'static Fixture {
    static FX: OnceLock<Fixture> = OnceLock::new();
    FX.get_or_init(|| Fixture::generated(1))
}

fn state() -> Arc<AppState> {
    AppState::new(fixture().bundle(), ScoringParams::default())
}

fn schema(name: &str) -> Value {
    let path = format!("{}/schemas/{name}.schema.json", env!("CARGO_MANIFEST_DIR"));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_valid(name: &str, body: &Value) {
    let validator = jsonschema::validator_for(&schema(name)).unwrap();
    let errors: Vec<String> = validator.iter_errors(body).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}\n{body}");
}

async fn send(state: Arc<AppState>, req: Request<Body>) -> (StatusCode, Value) {
    let resp = router(state).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let body = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| panic!("non-JSON body: {bytes:?}"))
    };
    (status, body)
}

async fn post(path: &str, body: &str) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(Method::POST)
        .uri(path)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_owned()))
        .unwrap();
    send(state(), req).await
}

async fn get(path: &str) -> (StatusCode, Value) {
    send(state(), Request::get(path).body(Body::empty()).unwrap()).await
}

fn assert_error(resp: &(StatusCode, Value), status: StatusCode, code: &str) {
    assert_eq!(resp.0, status, "{}", resp.1);
    assert_eq!(resp.1["code"], code);
    assert_valid("error", &resp.1);
}

fn two_entity_seed() -> Value {
    let fx = fixture();
    let t = fx.tables.iter().find(|t| t.core_entities.len() >= 2).unwrap();
    json!({
        "caption": t.caption,
        "entities": [t.core_entities[0], t.core_entities[1]],
        "labels": [t.labels[0]],
    })
}

#[tokio::test]
async fn health_reports_counts() {
    let (status, body) = get("/v1/health").await;
    assert_eq!(status, StatusCode::OK);
    assert_valid("health", &body);
    assert_eq!(body["tables"], fixture().tables.len());
    assert_eq!(body["entities"], fixture().kb.len());
}

#[tokio::test]
async fn rows_happy_path() {
    let seed = two_entity_seed();
    let (status, body) = post(
        "/v1/suggest/rows",
        &json!({"seed": seed, "limit": 5}).to_string(),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_valid("suggest_response", &body);
    let list = body["suggestions"].as_array().unwrap();
    assert!(!list.is_empty() && list.len() <= 5);
    let scores: Vec<f64> = list.iter().map(|s| s["score"].as_f64().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    let seed_ids = seed["entities"].as_array().unwrap();
    assert!(list.iter().all(|s| !seed_ids.contains(&s["target"])));

    let direct = suggest_rows(
        &serde_json::from_value(seed).unwrap(),
        &fixture().bundle(),
        &ScoringParams::default(),
        5,
    )
    .unwrap();
    assert_eq!(body["suggestions"], serde_json::to_value(direct).unwrap());
}

#[tokio::test]
async fn rows_default_limit_is_ten() {
    let fx = fixture();
    let t = fx.tables.iter().find(|t| !t.core_entities.is_empty()).unwrap();
    let body = json!({"seed": {"entities": [t.core_entities[0]]}}).to_string();
    let (status, body) = post("/v1/suggest/rows", &body).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body["suggestions"].as_array().unwrap().len() <= 10);
}

#[tokio::test]
async fn rows_errors() {
    let r = post("/v1/suggest/rows", r#"{"seed":{"caption":"x","entities":[]}}"#).await;
    assert_error(&r, StatusCode::UNPROCESSABLE_ENTITY, "EMPTY_SEED_ENTITIES");

    let r = post("/v1/suggest/rows", r#"{"seed":{"entities":["NOPE"]}}"#).await;
    assert_error(&r, StatusCode::UNPROCESSABLE_ENTITY, "UNKNOWN_ENTITY");
    assert_eq!(r.1["details"], json!(["NOPE"]));

    let r = post("/v1/suggest/rows", r#"{"seed": {"entities": ["#).await;
    assert_error(&r, StatusCode::BAD_REQUEST, "MALFORMED_JSON");

    let r = post("/v1/suggest/rows", "").await;
    assert_error(&r, StatusCode::BAD_REQUEST, "MALFORMED_JSON");

    let r = post("/v1/suggest/rows", r#"{"seed":{"entities":["E000001","E000001"]}}"#).await;
    assert_error(&r, StatusCode::UNPROCESSABLE_ENTITY, "INVALID_REQUEST");

    let r = post("/v1/suggest/rows", r#"{"limit":3}"#).await;
    assert_error(&r, StatusCode::UNPROCESSABLE_ENTITY, "INVALID_REQUEST");

    for limit in ["0", "101", "-4"] {
        let body = format!(r#"{{"seed":{{"entities":["NOPE"]}},"limit":{limit}}}"#);
        let r = post("/v1/suggest/rows", &body).await;
        assert_error(&r, StatusCode::UNPROCESSABLE_ENTITY, "INVALID_LIMIT");
    }
}

#[tokio::test]
async fn columns_caption_only() {
    let fx = fixture();
    let caption = tokenize(&fx.tables[0].caption).join(" ");
    let body = json!({"seed": {"caption": caption}}).to_string();
    let (status, body) = post("/v1/suggest/columns", &body).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_valid("suggest_response", &body);
    assert!(!body["suggestions"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn columns_errors() {
    let r = post("/v1/suggest/columns", r#"{"seed":{}}"#).await;
    assert_error(&r, StatusCode::UNPROCESSABLE_ENTITY, "EMPTY_SEED");
    let r = post(
        "/v1/suggest/columns",
        r#"{"seed":{"caption":"  ","entities":[],"labels":[]}}"#,
    )
    .await;
    assert_error(&r, StatusCode::UNPROCESSABLE_ENTITY, "EMPTY_SEED");
    let r = post("/v1/suggest/columns", r#"{"seed":{"entities":["NOPE","E000001"]}}"#).await;
    assert_error(&r, StatusCode::UNPROCESSABLE_ENTITY, "UNKNOWN_ENTITY");
    assert_eq!(r.1["details"], json!(["NOPE"]));
    let r = post("/v1/suggest/columns", "[1,").await;
    assert_error(&r, StatusCode::BAD_REQUEST, "MALFORMED_JSON");
}

#[tokio::test]
async fn columns_equal_engine_output() {
    let fx = fixture();
    let b = fx.bundle();
    let params = ScoringParams::default();
    for s in 0..10 {
        let seed = random_seed(fx, s);
        let related = find_related_tables(&seed, &b, &params).unwrap();
        let direct = rank_labels(&seed, &related, &b, 20);
        let req = Request::post("/v1/suggest/columns")
            .body(Body::from(json!({"seed": seed, "limit": 20}).to_string()))
            .unwrap();
        let resp = router(state()).oneshot(req).await.unwrap();
        assert_eq!(resp.status(), StatusCode::OK);
        let raw = resp.into_body().collect().await.unwrap().to_bytes();
        let took = serde_json::from_slice::<Value>(&raw).unwrap()["tookMicros"].clone();
        let want = format!(
            r#"{{"suggestions":{},"tookMicros":{took}}}"#,
            serde_json::to_string(&direct).unwrap()
        );
        assert_eq!(std::str::from_utf8(&raw).unwrap(), want);
    }
}

#[tokio::test]
async fn identical_requests_identical_bodies() {
    let body = json!({"seed": two_entity_seed(), "limit": 20}).to_string();
    for path in ["/v1/suggest/rows", "/v1/suggest/columns"] {
        let (_, mut a) = post(path, &body).await;
        let (_, mut b) = post(path, &body).await;
        assert!(a["tookMicros"].as_u64().is_some());
        a.as_object_mut().unwrap().remove("tookMicros");
        b.as_object_mut().unwrap().remove("tookMicros");
        assert_eq!(a, b);
    }
}

fn entity_oracle(q: &str) -> Vec<String> {
    let q = normalize_label(q);
    let qt = tokenize(&q);
    let mut hits: Vec<(u8, String)> = fixture()
        .kb
        .iter()
        .filter_map(|e| {
            let name = normalize_label(&e.label);
            let nt = tokenize(&name);
            let tier = if name == q {
                0
            } else if name.starts_with(&q) {
                1
            } else if !qt.is_empty() && qt.iter().all(|t| nt.iter().any(|n| n.starts_with(t))) {
                2
            } else {
                return None;
            };
            Some((tier, e.id.0.clone()))
        })
        .collect();
    hits.sort();
    hits.into_iter().map(|(_, id)| id).collect()
}

#[tokio::test]
async fn entity_search() {
    let fx = fixture();
    let target = &fx.kb[3];
    let q = urlencode(&target.label);
    let (status, body) = get(&format!("/v1/entities/search?q={q}&limit=100")).await;
    assert_eq!(status, StatusCode::OK);
    assert_valid("entity_hits", &body);
    assert_eq!(body[0]["id"], target.id.as_str());

    let (_, body) = get("/v1/entities/search?q=qqqqzzzz").await;
    assert_eq!(body, json!([]));

    for e in fx.kb.iter().take(10) {
        let prefix: String = e.label.chars().take(3).collect();
        let (_, body) =
            get(&format!("/v1/entities/search?q={}&limit=100", urlencode(&prefix))).await;
        let got: Vec<String> = body
            .as_array()
            .unwrap()
            .iter()
            .map(|h| h["id"].as_str().unwrap().to_owned())
            .collect();
        assert_eq!(got, entity_oracle(&prefix), "prefix {prefix:?}");
    }

    let r = get("/v1/entities/search?q=").await;
    assert_error(&r, StatusCode::BAD_REQUEST, "EMPTY_QUERY");
    let r = get("/v1/entities/search").await;
    assert_error(&r, StatusCode::BAD_REQUEST, "EMPTY_QUERY");
    let r = get("/v1/entities/search?q=a&limit=zero").await;
    assert_error(&r, StatusCode::BAD_REQUEST, "INVALID_QUERY");
    let r = get("/v1/entities/search?q=a&limit=500").await;
    assert_error(&r, StatusCode::UNPROCESSABLE_ENTITY, "INVALID_LIMIT");
}

fn urlencode(s: &str) -> String {
    s.bytes()
        .map(|b| match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' => (b as char).to_string(),
            _ => format!("%{b:02X}"),
        })
        .collect()
}

#[tokio::test]
async fn label_search_counts_tables() {
    let table = |id: &str, labels: &[&str]| CorpusTable {
        id: id.into(),
        page_title: String::new(),
        section_title: String::new(),
        caption: String::new(),
        labels: labels.iter().map(|&s| s.into()).collect(),
        core_entities: vec![],
        core_column: 0,
        cells: vec![vec![Cell::text("x")]],
    };
    let bundle = IndexBundle::build(
        vec![
            table("T1", &["Name", "Wins"]),
            table("T2", &["Name", "WINS"]),
            table("T3", &["Name", "Wins "]),
            table("T4", &["Name", "Losses"]),
        ],
        Vec::<EntityRecord>::new(),
    );
    let st = AppState::new(bundle, ScoringParams::default());
    let req = Request::get("/v1/labels/search?q=win").body(Body::empty()).unwrap();
    let (status, body) = send(st.clone(), req).await;
    assert_eq!(status, StatusCode::OK);
    assert_valid("label_hits", &body);
    assert_eq!(body, json!([{"label": "Wins", "tableCount": 3}]));
    let req = Request::get("/v1/labels/search?q=draws").body(Body::empty()).unwrap();
    assert_eq!(send(st, req).await.1, json!([]));
}

#[tokio::test]
async fn label_search_matches_vocabulary_scan() {
    let fx = fixture();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for t in &fx.tables {
        let mut seen: Vec<String> = t.labels.iter().map(|l| normalize_label(l)).collect();
        seen.sort();
        seen.dedup();
        for l in seen {
            *counts.entry(l).or_default() += 1;
        }
    }
    for q in ["n", "na", "no", "ye", "co"] {
        let mut want: Vec<(String, usize)> = counts
            .iter()
            .filter(|(l, _)| {
                l.starts_with(q) || tokenize(l).iter().any(|t| t.starts_with(q))
            })
            .map(|(l, &n)| (l.clone(), n))
            .collect();
        want.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        want.truncate(100);
        let (_, body) = get(&format!("/v1/labels/search?q={q}&limit=100")).await;
        assert_valid("label_hits", &body);
        let got: Vec<(String, usize)> = body
            .as_array()
            .unwrap()
            .iter()
            .map(|h| {
                (
                    normalize_label(h["label"].as_str().unwrap()),
                    h["tableCount"].as_u64().unwrap() as usize,
                )
            })
            .collect();
        assert_eq!(got, want, "q={q}");
    }
}

#[tokio::test]
async fn entity_lookup() {
    let fx = fixture();
    let e = &fx.kb[0];
    let (status, body) = get(&format!("/v1/entities/{}", e.id)).await;
    assert_eq!(status, StatusCode::OK);
    assert_valid("entity_record", &body);
    assert_eq!(body, serde_json::to_value(e).unwrap());

    let r = get("/v1/entities/NOPE").await;
    assert_error(&r, StatusCode::NOT_FOUND, "ENTITY_NOT_FOUND");
}

#[tokio::test]
async fn unknown_route_and_method_are_json() {
    let r = get("/v1/nothing").await;
    assert_error(&r, StatusCode::NOT_FOUND, "NOT_FOUND");
    let r = get("/v1/suggest/rows").await;
    assert_error(&r, StatusCode::METHOD_NOT_ALLOWED, "METHOD_NOT_ALLOWED");
}

#[tokio::test]
async fn cors_preflight() {
    let req = Request::builder()
        .method(Method::OPTIONS)
        .uri("/v1/suggest/rows")
        .header(header::ORIGIN, "http://localhost:5173")
        .header(header::ACCESS_CONTROL_REQUEST_METHOD, "POST")
        .body(Body::empty())
        .unwrap();
    let resp = router(state()).oneshot(req).await.unwrap();
    assert!(resp.status().is_success());
    assert_eq!(resp.headers()[header::ACCESS_CONTROL_ALLOW_ORIGIN], "*");
}

#[tokio::test]
async fn serve_shuts_down_gracefully() {
    use tokio::io::{AsyncReadExt, AsyncWriteExt};

    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(tablefill_service::serve(listener, state(), async {
        let _ = rx.await;
    }));

    let mut sock = tokio::net::TcpStream::connect(addr).await.unwrap();
    sock.write_all(b"GET /v1/health HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n")
        .await
        .unwrap();
    let mut raw = String::new();
    sock.read_to_string(&mut raw).await.unwrap();
    assert!(raw.starts_with("HTTP/1.1 200"), "{raw}");
    assert!(raw.contains(r#""status":"ok""#));

    tx.send(()).unwrap();
    tokio::time::timeout(std::time::Duration::from_secs(5), server)
        .await
        .unwrap()
        .unwrap()
        .unwrap();
}
