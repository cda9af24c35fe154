use std::collections::BTreeMap;
use std::time::Duration;

use serde::Serialize;
use serde_json::Value;

use super::{ConfounderAnswer, Expert, ExpertAnswer, GaussianPrior, PromptTemplates, QueryContext, render};
use crate::error::{Error, Result};
use crate::graph::EdgeCategory;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<ChatMessage>,
}

impl ChatRequest {
    fn new(model: &str, temperature: f64, system: String, user: String) -> Self {
        ChatRequest {
            model: model.to_string(),
            temperature,
            messages: vec![
                ChatMessage { role: "system".into(), content: system },
                ChatMessage { role: "user".into(), content: user },
            ],
        }
    }
}

/// Sends one chat request and returns the assistant's text.
pub trait ChatTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String>;
}

/// OpenAI-compatible chat-completions client.
pub struct UreqTransport {
    agent: ureq::Agent,
    endpoint: String,
    api_key: Option<String>,
}

impl UreqTransport {
    pub fn new(endpoint: &str, api_key: Option<String>, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        UreqTransport { agent: ureq::Agent::new_with_config(config), endpoint: endpoint.to_string(), api_key }
    }
}

impl ChatTransport for UreqTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String> {
        let body = serde_json::to_string(request)?;
        let mut req = self.agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send(body.as_str()).map_err(|e| Error::Expert(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| Error::Expert(e.to_string()))?;
        match status {
            200..=299 => {}
            401 | 403 => return Err(Error::ExpertAuth(format!("HTTP {status}"))),
            _ => return Err(Error::Expert(format!("HTTP {status}: {}", truncate(&text, 200)))),
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| Error::ExpertParse(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| Error::ExpertParse("no choices[0].message.content".into()))
    }
}

fn truncate(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((k, _)) => &s[..k],
        None => s,
    }
}

/// Pull the first JSON object out of a reply, tolerating prose around it and
/// trailing commas inside it.
fn extract_json(text: &str) -> Result<Value> {
    let start = text.find('{').ok_or_else(|| Error::ExpertParse("no JSON object in reply".into()))?;
    let end = text.rfind('}').filter(|&e| e > start).ok_or_else(|| Error::ExpertParse("unterminated JSON object".into()))?;
    let body = &text[start..=end];
    if let Ok(v) = serde_json::from_str(body) {
        return Ok(v);
    }
    let mut cleaned = String::with_capacity(body.len());
    let chars: Vec<char> = body.chars().collect();
    for (k, &c) in chars.iter().enumerate() {
        if c == ',' {
            let next = chars[k + 1..].iter().find(|c| !c.is_whitespace());
            if matches!(next, Some('}') | Some(']')) {
                continue;
            }
        }
        cleaned.push(c);
    }
    serde_json::from_str(&cleaned).map_err(|e| Error::ExpertParse(e.to_string()))
}

fn as_number(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

/// Parse the `option` field of an edge reply.
pub fn parse_edge_option(text: &str) -> Result<EdgeCategory> {
    let v = extract_json(text)?;
    let opt = v.get("option").and_then(as_number).ok_or_else(|| Error::ExpertParse("missing option".into()))?;
    if opt.fract() != 0.0 || !(0.0..=6.0).contains(&opt) {
        return Err(Error::ExpertParse(format!("option {opt} outside 0..=6")));
    }
    EdgeCategory::from_prompt_option(opt as u8).ok_or_else(|| Error::ExpertParse(format!("option {opt}")))
}

pub fn parse_confounder(text: &str) -> Result<ConfounderAnswer> {
    let name = text.trim().trim_matches(|c: char| c == '"' || c == '\'' || c == '.' || c == '`').trim();
    if name.is_empty() {
        return Err(Error::ExpertParse("empty confounder name".into()));
    }
    if name.eq_ignore_ascii_case("undefined") {
        return Ok(ConfounderAnswer::Undefined);
    }
    Ok(ConfounderAnswer::Named(name.to_string()))
}

/// Mean and variance of a prior reply. A variance that is not positive is
/// repaired to 1 and reported through the returned flag.
pub fn parse_prior(text: &str) -> Result<(GaussianPrior, bool)> {
    let v = extract_json(text)?;
    let mean = v.get("mean").and_then(as_number).ok_or_else(|| Error::ExpertParse("non-numeric mean".into()))?;
    let var = v.get("variance").and_then(as_number).ok_or_else(|| Error::ExpertParse("non-numeric variance".into()))?;
    if !mean.is_finite() {
        return Err(Error::ExpertParse("non-finite mean".into()));
    }
    if var > 0.0 && var.is_finite() {
        Ok((GaussianPrior { mean, variance: var }, false))
    } else {
        Ok((GaussianPrior { mean, variance: 1.0 }, true))
    }
}

/// Correlations keyed by the reply's own labels; unparseable replies give an empty map.
fn parse_correlations(text: &str) -> BTreeMap<String, f64> {
    let Ok(v) = extract_json(text) else { return BTreeMap::new() };
    let Some(obj) = v.get("correlation").and_then(Value::as_object) else { return BTreeMap::new() };
    obj.iter().filter_map(|(k, v)| as_number(v).map(|r| (k.clone(), r))).collect()
}

fn normalise(name: &str) -> String {
    name.chars().filter(|c| c.is_ascii_alphanumeric()).flat_map(char::to_lowercase).collect()
}

/// Expert backed by a chat-completions endpoint.
pub struct HttpExpert {
    transport: Box<dyn ChatTransport>,
    templates: PromptTemplates,
    variables: Vec<String>,
    descriptions: BTreeMap<String, String>,
    experiment_name: String,
    model: String,
    temperature: f64,
    retries: u32,
    /// Last prior reply per confounder; the same reply carries the correlations.
    prior_replies: BTreeMap<String, String>,
    warnings: Vec<String>,
}

impl HttpExpert {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        transport: Box<dyn ChatTransport>,
        templates: PromptTemplates,
        experiment_name: &str,
        variables: Vec<String>,
        descriptions: BTreeMap<String, String>,
        model: &str,
        temperature: f64,
        retries: u32,
    ) -> Self {
        HttpExpert {
            transport,
            templates,
            variables,
            descriptions,
            experiment_name: experiment_name.to_string(),
            model: model.to_string(),
            temperature,
            retries,
            prior_replies: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    /// Warnings raised while repairing replies, drained by the caller.
    pub fn take_warnings(&mut self) -> Vec<String> {
        std::mem::take(&mut self.warnings)
    }

    fn name(&self, i: usize) -> Result<&str> {
        self.variables.get(i).map(String::as_str).ok_or_else(|| Error::UnknownVariable(format!("#{i}")))
    }

    fn system_slots(&self) -> BTreeMap<&'static str, String> {
        let description: String = self
            .variables
            .iter()
            .map(|v| format!("\n{v}: {}", self.descriptions.get(v).map(String::as_str).unwrap_or(v)))
            .collect();
        BTreeMap::from([
            ("experiment_name", self.experiment_name.clone()),
            ("variables", self.variables.join(", ")),
            ("variable_description", description),
        ])
    }

    pub fn edge_request(&self, a: usize, b: usize, ctx: &QueryContext) -> Result<ChatRequest> {
        let slots = BTreeMap::from([
            ("A", self.name(a)?.to_string()),
            ("B", self.name(b)?.to_string()),
            ("known_relationship", ctx.known_text()),
        ]);
        let system = render(&self.templates.edge_system, &self.system_slots());
        Ok(ChatRequest::new(&self.model, self.temperature, system, render(&self.templates.edge_user, &slots)))
    }

    pub fn confounder_request(&self, a: usize, b: usize) -> Result<ChatRequest> {
        let slots = BTreeMap::from([("latent_0", self.name(a)?.to_string()), ("latent_1", self.name(b)?.to_string())]);
        let system = render(&self.templates.confounder_system, &self.system_slots());
        Ok(ChatRequest::new(&self.model, self.temperature, system, render(&self.templates.confounder_user, &slots)))
    }

    pub fn prior_request(&self, confounder: &str, neighbors: &[usize]) -> Result<ChatRequest> {
        let names = neighbors.iter().map(|&i| self.name(i)).collect::<Result<Vec<_>>>()?;
        let first = names.first().copied().unwrap_or("");
        let rest = if names.len() > 1 { names[1..].join(", ") } else { first.to_string() };
        let slots = BTreeMap::from([
            ("confounder", confounder.to_string()),
            ("latent", confounder.to_string()),
            ("variable_1", first.to_string()),
            ("variable_2", rest),
        ]);
        let system = render(&self.templates.prior_system, &self.system_slots());
        Ok(ChatRequest::new(&self.model, self.temperature, system, render(&self.templates.prior_user, &slots)))
    }

    /// Send with retries; credential errors are not retried.
    fn call<T>(&mut self, req: &ChatRequest, parse: impl Fn(&str) -> Result<T>) -> Result<(T, String)> {
        let mut last = Error::Expert("no attempt made".into());
        for attempt in 0..=self.retries {
            match self.transport.complete(req) {
                Ok(text) => match parse(&text) {
                    Ok(v) => return Ok((v, text)),
                    Err(e) => last = e,
                },
                Err(e @ Error::ExpertAuth(_)) => return Err(e),
                Err(e) => last = e,
            }
            log::debug!("expert attempt {} failed: {last}", attempt + 1);
        }
        Err(last)
    }
}

impl Expert for HttpExpert {
    fn query_edge(&mut self, a: usize, b: usize, ctx: &QueryContext) -> Result<ExpertAnswer> {
        if a == b {
            return Err(Error::SelfLoop(self.name(a)?.to_string()));
        }
        let req = self.edge_request(a, b, ctx)?;
        let (category, raw) = self.call(&req, parse_edge_option)?;
        Ok(ExpertAnswer { category, raw: Some(raw) })
    }

    fn query_confounder(&mut self, a: usize, b: usize) -> Result<ConfounderAnswer> {
        let req = self.confounder_request(a, b)?;
        Ok(self.call(&req, parse_confounder)?.0)
    }

    fn query_prior(&mut self, confounder: &str, neighbors: &[usize]) -> Result<GaussianPrior> {
        let req = self.prior_request(confounder, neighbors)?;
        let ((prior, repaired), raw) = self.call(&req, parse_prior)?;
        if repaired {
            let w = format!("prior for {confounder} had a nonpositive variance; using 1.0");
            log::warn!("{w}");
            self.warnings.push(w);
        }
        self.prior_replies.insert(confounder.to_string(), raw);
        Ok(prior)
    }

    fn query_correlation(&mut self, confounder: &str, neighbors: &[usize]) -> Result<BTreeMap<String, f64>> {
        let raw = match self.prior_replies.get(confounder) {
            Some(r) => r.clone(),
            None => {
                let req = self.prior_request(confounder, neighbors)?;
                match self.call(&req, |t| Ok(t.to_string())) {
                    Ok((t, _)) => t,
                    Err(e) if e.is_external() => return Ok(BTreeMap::new()),
                    Err(e) => return Err(e),
                }
            }
        };
        let parsed = parse_correlations(&raw);
        let mut out = BTreeMap::new();
        for &i in neighbors {
            let name = self.name(i)?.to_string();
            let key = normalise(&name);
            if let Some((_, &r)) = parsed.iter().find(|(k, _)| normalise(k) == key) {
                if !(-1.0..=1.0).contains(&r) {
                    let w = format!("correlation {r} for {name} clamped to [-1, 1]");
                    log::warn!("{w}");
                    self.warnings.push(w);
                }
                out.insert(name, r.clamp(-1.0, 1.0));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::RefCell;
    use std::collections::VecDeque;

    struct Canned(RefCell<VecDeque<Result<String>>>);

    impl ChatTransport for Canned {
        fn complete(&self, _request: &ChatRequest) -> Result<String> {
            self.0.borrow_mut().pop_front().unwrap_or_else(|| Err(Error::Expert("exhausted".into())))
        }
    }

    fn expert(replies: Vec<Result<String>>, retries: u32) -> HttpExpert {
        HttpExpert::new(
            Box::new(Canned(RefCell::new(replies.into()))),
            PromptTemplates::default(),
            "red wine quality",
            vec!["Density".into(), "Quality".into()],
            BTreeMap::new(),
            "m",
            0.7,
            retries,
        )
    }

    #[test]
    fn options_map_to_categories() {
        assert_eq!(parse_edge_option("{\"option\": 2, \"thoughts\": \"x\"}").unwrap(), EdgeCategory::Bidirected);
        assert_eq!(parse_edge_option("Sure:\n{\"option\": \"1\",}").unwrap(), EdgeCategory::Directed);
        assert_eq!(parse_edge_option("{\"option\": 5}").unwrap(), EdgeCategory::ReverseDirected);
        assert!(parse_edge_option("{\"option\": 9}").is_err());
        assert!(parse_edge_option("no json").is_err());
    }

    #[test]
    fn confounder_and_prior_parsing() {
        assert_eq!(parse_confounder(" 'undefined' ").unwrap(), ConfounderAnswer::Undefined);
        assert_eq!(parse_confounder("alcohol_content\n").unwrap(), ConfounderAnswer::Named("alcohol_content".into()));
        let (p, fixed) = parse_prior("{\"mean\": \"12.5\", \"variance\": 2.5, \"correlation\": {}}").unwrap();
        assert_eq!((p.mean, p.variance, fixed), (12.5, 2.5, false));
        let (p, fixed) = parse_prior("{\"mean\": 0, \"variance\": -3}").unwrap();
        assert_eq!((p.variance, fixed), (1.0, true));
        assert!(parse_prior("{\"mean\": \"high\", \"variance\": 1}").is_err());
    }

    #[test]
    fn retries_then_succeeds() {
        let mut e = expert(vec![Err(Error::Expert("timeout".into())), Ok("garbage".into()), Ok("{\"option\": 0}".into())], 2);
        let a = e.query_edge(0, 1, &QueryContext::default()).unwrap();
        assert_eq!(a.category, EdgeCategory::NoEdge);
        let mut e = expert(vec![Ok("garbage".into()), Ok("garbage".into())], 1);
        assert!(matches!(e.query_edge(0, 1, &QueryContext::default()), Err(Error::ExpertParse(_))));
    }

    #[test]
    fn auth_is_not_retried() {
        let mut e = expert(vec![Err(Error::ExpertAuth("HTTP 401".into())), Ok("{\"option\": 0}".into())], 3);
        assert!(matches!(e.query_edge(0, 1, &QueryContext::default()), Err(Error::ExpertAuth(_))));
    }

    #[test]
    fn correlations_follow_prior_reply() {
        let reply = "{\"mean\": 12.5, \"variance\": 2.5, \"correlation\": {\"density\": -0.5, \"Quality\": 1.7}}";
        let mut e = expert(vec![Ok(reply.into())], 0);
        e.query_prior("alcohol", &[0, 1]).unwrap();
        let r = e.query_correlation("alcohol", &[0, 1]).unwrap();
        assert_eq!(r["Density"], -0.5);
        assert_eq!(r["Quality"], 1.0);
        assert_eq!(e.take_warnings().len(), 1);
        let mut e = expert(vec![Ok(String::new())], 0);
        assert!(e.query_correlation("alcohol", &[0, 1]).unwrap().is_empty());
    }
}
