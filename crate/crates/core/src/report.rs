//! Behavior object model, interchange serialization, and natural-language
//! report rendering.
//!
//! A [`BehaviorModel`] is a small object graph: one user in one home, a
//! catalog of appliances, and the day's usage intervals, each linking the
//! user to an appliance. The graph serializes to a self-contained
//! element/attribute document (see `serialize_model`) and renders to text
//! through a [`ReportTemplate`] — by default one sentence per usage, e.g.
//! `Rune was using the TV-CRT from 09:50 to 11:45.`

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::UsageInterval;
use crate::trace::ApplianceId;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("usage references appliance '{0}' which is not in the catalog")]
    UnknownAppliance(String),
    #[error("duplicate appliance '{0}' in catalog")]
    DuplicateAppliance(String),
    #[error("template slot '{{{0}}}' is not resolvable")]
    UnknownSlot(String),
    #[error("template has an unterminated '{{' at byte {0}")]
    UnterminatedSlot(usize),
    #[error("interchange document: {0}")]
    Malformed(String),
}

/// One user's day of appliance activity.
///
/// Every usage references a cataloged appliance; that reference is the
/// user→appliance dependency edge of the graph. Usages are sorted by
/// (start, appliance name), the catalog by id, so equal models always
/// serialize to identical bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BehaviorModel {
    user: String,
    home: String,
    appliances: Vec<ApplianceId>,
    usages: Vec<UsageInterval>,
}

impl BehaviorModel {
    pub fn user(&self) -> &str {
        &self.user
    }

    pub fn home(&self) -> &str {
        &self.home
    }

    pub fn appliances(&self) -> &[ApplianceId] {
        &self.appliances
    }

    pub fn usages(&self) -> &[UsageInterval] {
        &self.usages
    }
}

/// Assemble and validate the object graph.
pub fn build_model(
    user: &str,
    home: &str,
    usages: Vec<UsageInterval>,
    catalog: &[ApplianceId],
) -> Result<BehaviorModel, ReportError> {
    let mut appliances = catalog.to_vec();
    appliances.sort();
    for pair in appliances.windows(2) {
        if pair[0] == pair[1] {
            return Err(ReportError::DuplicateAppliance(pair[0].to_string()));
        }
    }
    for usage in &usages {
        if !appliances.contains(usage.appliance()) {
            return Err(ReportError::UnknownAppliance(usage.appliance().to_string()));
        }
    }
    let mut usages = usages;
    usages.sort_by(|a, b| {
        (a.start_second(), &a.appliance().name, a.stop_second()).cmp(&(
            b.start_second(),
            &b.appliance().name,
            b.stop_second(),
        ))
    });
    Ok(BehaviorModel {
        user: user.to_string(),
        home: home.to_string(),
        appliances,
        usages,
    })
}

// ---------------------------------------------------------------------------
// Interchange document
// ---------------------------------------------------------------------------
//
// Schema (all values are attributes; element order is fixed):
//
//   <behavior user="..." home="...">
//     <appliance name="..." type="..."/>           (sorted by name, type)
//     <usage appliance="..." day="YYYY-MM-DD" start="S" stop="S"/>
//   </behavior>
//
// `start`/`stop` are seconds of day, half-open, stop ≤ 86400.

/// A node of the interchange document tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Element {
    pub name: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<Element>,
}

impl Element {
    fn new(name: &str) -> Element {
        Element {
            name: name.to_string(),
            attrs: Vec::new(),
            children: Vec::new(),
        }
    }

    fn attr(mut self, key: &str, value: impl Into<String>) -> Element {
        self.attrs.push((key.to_string(), value.into()));
        self
    }

    fn get_attr(&self, key: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn require_attr(&self, key: &str) -> Result<&str, ReportError> {
        self.get_attr(key).ok_or_else(|| {
            ReportError::Malformed(format!("<{}> missing attribute '{key}'", self.name))
        })
    }

    fn write(&self, depth: usize, out: &mut String) {
        for _ in 0..depth {
            out.push_str("  ");
        }
        out.push('<');
        out.push_str(&self.name);
        for (k, v) in &self.attrs {
            out.push(' ');
            out.push_str(k);
            out.push_str("=\"");
            out.push_str(&escape(v));
            out.push('"');
        }
        if self.children.is_empty() {
            out.push_str("/>\n");
        } else {
            out.push_str(">\n");
            for child in &self.children {
                child.write(depth + 1, out);
            }
            for _ in 0..depth {
                out.push_str("  ");
            }
            out.push_str("</");
            out.push_str(&self.name);
            out.push_str(">\n");
        }
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn unescape(text: &str) -> Result<String, ReportError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(pos) = rest.find('&') {
        out.push_str(&rest[..pos]);
        rest = &rest[pos..];
        let entity_end = rest
            .find(';')
            .ok_or_else(|| ReportError::Malformed(format!("unterminated entity in '{text}'")))?;
        match &rest[..=entity_end] {
            "&amp;" => out.push('&'),
            "&lt;" => out.push('<'),
            "&gt;" => out.push('>'),
            "&quot;" => out.push('"'),
            "&apos;" => out.push('\''),
            other => {
                return Err(ReportError::Malformed(format!("unknown entity '{other}'")));
            }
        }
        rest = &rest[entity_end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Minimal parser for the subset of XML the serializer emits: nested
/// elements with double-quoted attributes, self-closing tags, whitespace
/// between tags, nothing else.
struct DocParser<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> DocParser<'a> {
    fn new(text: &'a str) -> DocParser<'a> {
        DocParser { text, pos: 0 }
    }

    fn error(&self, message: &str) -> ReportError {
        ReportError::Malformed(format!("{message} at byte {}", self.pos))
    }

    fn skip_whitespace(&mut self) {
        let rest = &self.text[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn eat(&mut self, token: &str) -> Result<(), ReportError> {
        if self.text[self.pos..].starts_with(token) {
            self.pos += token.len();
            Ok(())
        } else {
            Err(self.error(&format!("expected '{token}'")))
        }
    }

    fn name(&mut self) -> Result<String, ReportError> {
        let start = self.pos;
        for c in self.text[self.pos..].chars() {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
        if self.pos == start {
            return Err(self.error("expected a name"));
        }
        Ok(self.text[start..self.pos].to_string())
    }

    fn element(&mut self) -> Result<Element, ReportError> {
        self.skip_whitespace();
        self.eat("<")?;
        let name = self.name()?;
        let mut element = Element::new(&name);
        loop {
            self.skip_whitespace();
            if self.text[self.pos..].starts_with("/>") {
                self.pos += 2;
                return Ok(element);
            }
            if self.text[self.pos..].starts_with('>') {
                self.pos += 1;
                break;
            }
            let key = self.name()?;
            self.eat("=")?;
            self.eat("\"")?;
            let value_start = self.pos;
            let close = self.text[self.pos..]
                .find('"')
                .ok_or_else(|| self.error("unterminated attribute value"))?;
            let raw = &self.text[value_start..value_start + close];
            self.pos = value_start + close + 1;
            element.attrs.push((key, unescape(raw)?));
        }
        // Children until the matching close tag.
        loop {
            self.skip_whitespace();
            if self.text[self.pos..].starts_with("</") {
                self.pos += 2;
                let close_name = self.name()?;
                if close_name != element.name {
                    return Err(self.error(&format!(
                        "mismatched close tag '{close_name}' for <{}>",
                        element.name
                    )));
                }
                self.eat(">")?;
                return Ok(element);
            }
            if self.pos >= self.text.len() {
                return Err(self.error(&format!("unclosed <{}>", element.name)));
            }
            element.children.push(self.element()?);
        }
    }

    fn document(&mut self) -> Result<Element, ReportError> {
        let root = self.element()?;
        self.skip_whitespace();
        if self.pos != self.text.len() {
            return Err(self.error("trailing content after document root"));
        }
        Ok(root)
    }
}

/// Serialize a model to the interchange document. Equal models always
/// produce identical bytes.
pub fn serialize_model(model: &BehaviorModel) -> String {
    let mut root = Element::new("behavior")
        .attr("user", model.user.clone())
        .attr("home", model.home.clone());
    for appliance in &model.appliances {
        root.children.push(
            Element::new("appliance")
                .attr("name", appliance.name.clone())
                .attr("type", appliance.type_tag.clone()),
        );
    }
    for usage in &model.usages {
        root.children.push(
            Element::new("usage")
                .attr("appliance", usage.appliance().name.clone())
                .attr("day", usage.day().format("%Y-%m-%d").to_string())
                .attr("start", usage.start_second().to_string())
                .attr("stop", usage.stop_second().to_string()),
        );
    }
    let mut out = String::new();
    root.write(0, &mut out);
    out
}

/// Parse an interchange document back into a validated model.
pub fn deserialize_model(text: &str) -> Result<BehaviorModel, ReportError> {
    let root = DocParser::new(text).document()?;
    if root.name != "behavior" {
        return Err(ReportError::Malformed(format!(
            "expected <behavior> root, found <{}>",
            root.name
        )));
    }
    let user = root.require_attr("user")?;
    let home = root.require_attr("home")?;
    let mut catalog: Vec<ApplianceId> = Vec::new();
    let mut usages: Vec<UsageInterval> = Vec::new();
    let bad = |field: &str, value: &str| {
        ReportError::Malformed(format!("invalid {field} '{value}'"))
    };
    for child in &root.children {
        match child.name.as_str() {
            "appliance" => {
                let name = child.require_attr("name")?;
                let type_tag = child.require_attr("type")?;
                catalog.push(
                    ApplianceId::new(name, type_tag).map_err(|e| {
                        ReportError::Malformed(format!("bad appliance: {e}"))
                    })?,
                );
            }
            "usage" => {
                let name = child.require_attr("appliance")?;
                let appliance = catalog
                    .iter()
                    .find(|a| a.name == name)
                    .ok_or_else(|| ReportError::UnknownAppliance(name.to_string()))?
                    .clone();
                let day_text = child.require_attr("day")?;
                let day = chrono::NaiveDate::parse_from_str(day_text, "%Y-%m-%d")
                    .map_err(|_| bad("day", day_text))?;
                let start_text = child.require_attr("start")?;
                let start: u32 = start_text.parse().map_err(|_| bad("start", start_text))?;
                let stop_text = child.require_attr("stop")?;
                let stop: u32 = stop_text.parse().map_err(|_| bad("stop", stop_text))?;
                usages.push(
                    UsageInterval::new(day, appliance, start, stop)
                        .map_err(|e| ReportError::Malformed(format!("bad usage: {e}")))?,
                );
            }
            other => {
                return Err(ReportError::Malformed(format!("unexpected <{other}>")));
            }
        }
    }
    build_model(user, home, usages, &catalog)
}

// ---------------------------------------------------------------------------
// Template rendering
// ---------------------------------------------------------------------------

/// Sentence pattern plus list-separator rules for time ranges.
///
/// Supported slots: `{user}`, `{appliance}`, `{times}`, `{start}`, `{stop}`.
/// A time range renders as `range_prefix start range_infix stop`; `{times}`
/// is the range list joined by `range_join` and terminated by `range_close`.
/// With `group_by_appliance` one sentence covers all of an appliance's
/// ranges, in which case `{start}`/`{stop}` are ambiguous and rejected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportTemplate {
    pub sentence: String,
    pub range_prefix: String,
    pub range_infix: String,
    pub range_close: String,
    pub range_join: String,
    pub group_by_appliance: bool,
    pub empty_sentence: String,
}

impl Default for ReportTemplate {
    fn default() -> Self {
        ReportTemplate {
            sentence: "{user} was using the {appliance} {times}".to_string(),
            range_prefix: "from ".to_string(),
            range_infix: " to ".to_string(),
            range_close: ".".to_string(),
            range_join: ", ".to_string(),
            group_by_appliance: false,
            empty_sentence: "No appliance usage detected.".to_string(),
        }
    }
}

impl ReportTemplate {
    /// Check the sentence's slots without a model: unknown or unterminated
    /// slots (including `{start}`/`{stop}` under grouping) fail here rather
    /// than midway through rendering a report.
    pub fn validate(&self) -> Result<(), ReportError> {
        let (start, stop) = if self.group_by_appliance {
            (None, None)
        } else {
            (Some(String::new()), Some(String::new()))
        };
        let values = SlotValues {
            user: "",
            appliance: "",
            times: String::new(),
            start,
            stop,
        };
        fill(&self.sentence, &values).map(|_| ())
    }
}

/// Format a second of day as truncated 24-hour `HH:MM`. The exclusive
/// day-end second 86400 prints as `24:00`.
pub fn hhmm(second: u32) -> String {
    format!("{:02}:{:02}", second / 3600, (second % 3600) / 60)
}

struct SlotValues<'a> {
    user: &'a str,
    appliance: &'a str,
    times: String,
    start: Option<String>,
    stop: Option<String>,
}

fn fill(template: &str, values: &SlotValues) -> Result<String, ReportError> {
    let mut out = String::with_capacity(template.len() + 32);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let consumed = template.len() - rest.len() + open;
        let close = after
            .find('}')
            .ok_or(ReportError::UnterminatedSlot(consumed))?;
        let slot = &after[..close];
        match slot {
            "user" => out.push_str(values.user),
            "appliance" => out.push_str(values.appliance),
            "times" => out.push_str(&values.times),
            "start" => match &values.start {
                Some(s) => out.push_str(s),
                None => return Err(ReportError::UnknownSlot("start".to_string())),
            },
            "stop" => match &values.stop {
                Some(s) => out.push_str(s),
                None => return Err(ReportError::UnknownSlot("stop".to_string())),
            },
            other => return Err(ReportError::UnknownSlot(other.to_string())),
        }
        rest = &after[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

fn range_text(template: &ReportTemplate, start: u32, stop: u32) -> String {
    format!(
        "{}{}{}{}",
        template.range_prefix,
        hhmm(start),
        template.range_infix,
        hhmm(stop)
    )
}

/// Render the model: one sentence per usage (or per appliance when
/// grouping), one per line, in model order; the no-activity sentence when
/// the model has no usages.
pub fn render_report(
    model: &BehaviorModel,
    template: &ReportTemplate,
) -> Result<String, ReportError> {
    if model.usages.is_empty() {
        return Ok(format!("{}\n", template.empty_sentence));
    }
    let mut out = String::new();
    if template.group_by_appliance {
        // One sentence per appliance, in order of first usage.
        let mut order: Vec<&ApplianceId> = Vec::new();
        for usage in &model.usages {
            if !order.contains(&usage.appliance()) {
                order.push(usage.appliance());
            }
        }
        for appliance in order {
            let ranges: Vec<String> = model
                .usages
                .iter()
                .filter(|u| u.appliance() == appliance)
                .map(|u| range_text(template, u.start_second(), u.stop_second()))
                .collect();
            let times = format!("{}{}", ranges.join(&template.range_join), template.range_close);
            let values = SlotValues {
                user: &model.user,
                appliance: &appliance.name,
                times,
                start: None,
                stop: None,
            };
            out.push_str(&fill(&template.sentence, &values)?);
            out.push('\n');
        }
    } else {
        for usage in &model.usages {
            let times = format!(
                "{}{}",
                range_text(template, usage.start_second(), usage.stop_second()),
                template.range_close
            );
            let values = SlotValues {
                user: &model.user,
                appliance: &usage.appliance().name,
                times,
                start: Some(hhmm(usage.start_second())),
                stop: Some(hhmm(usage.stop_second())),
            };
            out.push_str(&fill(&template.sentence, &values)?);
            out.push('\n');
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn day() -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, 5, 6).unwrap()
    }

    #[test]
    fn template_validate_mirrors_render_errors() {
        assert!(ReportTemplate::default().validate().is_ok());
        let mut t = ReportTemplate::default();
        t.sentence = "{start}-{stop}: {appliance}".to_string();
        assert!(t.validate().is_ok());
        t.group_by_appliance = true;
        assert!(matches!(t.validate(), Err(ReportError::UnknownSlot(s)) if s == "start"));
        t.sentence = "{user} left {the".to_string();
        assert!(matches!(
            t.validate(),
            Err(ReportError::UnterminatedSlot(_))
        ));
        t.sentence = "{nope}".to_string();
        assert!(matches!(t.validate(), Err(ReportError::UnknownSlot(s)) if s == "nope"));
    }

    fn id(name: &str, type_tag: &str) -> ApplianceId {
        ApplianceId::new(name, type_tag).unwrap()
    }

    fn usage(appliance: &ApplianceId, start: u32, stop: u32) -> UsageInterval {
        UsageInterval::new(day(), appliance.clone(), start, stop).unwrap()
    }

    fn reference_model() -> BehaviorModel {
        let tv = id("TV-CRT", "tv");
        build_model(
            "Rune",
            "home-1",
            vec![usage(&tv, 9 * 3600 + 50 * 60, 11 * 3600 + 45 * 60)],
            &[tv.clone()],
        )
        .unwrap()
    }

    #[test]
    fn renders_reference_sentence_exactly() {
        let text = render_report(&reference_model(), &ReportTemplate::default()).unwrap();
        assert_eq!(text, "Rune was using the TV-CRT from 09:50 to 11:45.\n");
    }

    #[test]
    fn times_truncate_to_minutes() {
        assert_eq!(hhmm(9 * 3600 + 50 * 60 + 59), "09:50");
        assert_eq!(hhmm(0), "00:00");
        assert_eq!(hhmm(86_400), "24:00");
    }

    #[test]
    fn empty_model_renders_no_activity_sentence() {
        let model = build_model("Rune", "home-1", vec![], &[id("TV-CRT", "tv")]).unwrap();
        let text = render_report(&model, &ReportTemplate::default()).unwrap();
        assert_eq!(text, "No appliance usage detected.\n");
    }

    #[test]
    fn three_usages_render_three_chronological_lines() {
        let kettle = id("Kettle", "kettle");
        let toaster = id("Toaster", "toaster");
        let model = build_model(
            "Alice",
            "h",
            vec![
                usage(&toaster, 68_400, 69_300),
                usage(&kettle, 25_200, 25_500),
                usage(&kettle, 30_000, 30_600),
            ],
            &[kettle.clone(), toaster.clone()],
        )
        .unwrap();
        let text = render_report(&model, &ReportTemplate::default()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        // Oracle: format each sorted usage independently.
        let expect = [
            ("Kettle", 25_200u32, 25_500u32),
            ("Kettle", 30_000, 30_600),
            ("Toaster", 68_400, 69_300),
        ];
        for (line, (name, start, stop)) in lines.iter().zip(expect) {
            let oracle = format!(
                "Alice was using the {name} from {} to {}.",
                hhmm(start),
                hhmm(stop)
            );
            assert_eq!(*line, oracle);
        }
    }

    #[test]
    fn grouped_template_lists_ranges_with_separators() {
        let kettle = id("Kettle", "kettle");
        let toaster = id("Toaster", "toaster");
        let model = build_model(
            "Alice",
            "h",
            vec![
                usage(&kettle, 25_200, 25_500),
                usage(&kettle, 30_000, 30_600),
                usage(&toaster, 68_400, 69_300),
            ],
            &[kettle, toaster],
        )
        .unwrap();
        let template = ReportTemplate {
            group_by_appliance: true,
            ..ReportTemplate::default()
        };
        let text = render_report(&model, &template).unwrap();
        assert_eq!(
            text,
            "Alice was using the Kettle from 07:00 to 07:05, from 08:20 to 08:30.\n\
             Alice was using the Toaster from 19:00 to 19:15.\n"
        );
    }

    #[test]
    fn unknown_slot_is_named_in_error() {
        let template = ReportTemplate {
            sentence: "{user} had {breakfast}".to_string(),
            ..ReportTemplate::default()
        };
        match render_report(&reference_model(), &template) {
            Err(ReportError::UnknownSlot(slot)) => assert_eq!(slot, "breakfast"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn start_stop_slots_work_per_usage_but_not_grouped() {
        let template = ReportTemplate {
            sentence: "{appliance}: {start}-{stop}".to_string(),
            ..ReportTemplate::default()
        };
        let text = render_report(&reference_model(), &template).unwrap();
        assert_eq!(text, "TV-CRT: 09:50-11:45\n");
        let grouped = ReportTemplate {
            group_by_appliance: true,
            ..template
        };
        assert!(matches!(
            render_report(&reference_model(), &grouped),
            Err(ReportError::UnknownSlot(_))
        ));
    }

    #[test]
    fn unterminated_slot_is_rejected() {
        let template = ReportTemplate {
            sentence: "{user} was {".to_string(),
            ..ReportTemplate::default()
        };
        assert!(matches!(
            render_report(&reference_model(), &template),
            Err(ReportError::UnterminatedSlot(_))
        ));
    }

    #[test]
    fn build_model_rejects_unknown_appliance() {
        let tv = id("TV-CRT", "tv");
        let ghost = id("Ghost", "x");
        assert!(matches!(
            build_model("R", "h", vec![usage(&ghost, 0, 10)], &[tv]),
            Err(ReportError::UnknownAppliance(_))
        ));
    }

    #[test]
    fn build_model_rejects_duplicate_catalog_entries() {
        let tv = id("TV-CRT", "tv");
        assert!(matches!(
            build_model("R", "h", vec![], &[tv.clone(), tv]),
            Err(ReportError::DuplicateAppliance(_))
        ));
    }

    #[test]
    fn build_model_sorts_usages_like_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let catalog: Vec<ApplianceId> =
            ["A", "B", "C"].iter().map(|n| id(n, "x")).collect();
        let mut usages = Vec::new();
        for _ in 0..50 {
            let appliance = catalog[rng.gen_range(0..3)].clone();
            let start = rng.gen_range(0..86_000u32);
            let stop = start + rng.gen_range(1..300u32);
            usages.push(UsageInterval::new(day(), appliance, start, stop).unwrap());
        }
        let model = build_model("R", "h", usages.clone(), &catalog).unwrap();
        let mut oracle = usages;
        oracle.sort_by_key(|u| (u.start_second(), u.appliance().name.clone(), u.stop_second()));
        assert_eq!(model.usages(), &oracle[..]);
    }

    #[test]
    fn empty_model_document_has_no_usage_nodes() {
        let model = build_model("Rune", "home-1", vec![], &[id("TV-CRT", "tv")]).unwrap();
        let doc = serialize_model(&model);
        assert!(doc.contains("<behavior user=\"Rune\" home=\"home-1\">"));
        assert!(doc.contains("<appliance name=\"TV-CRT\" type=\"tv\"/>"));
        assert!(!doc.contains("<usage"));
    }

    #[test]
    fn serialize_deserialize_serialize_is_byte_identical() {
        let model = reference_model();
        let once = serialize_model(&model);
        let back = deserialize_model(&once).unwrap();
        assert_eq!(back, model);
        assert_eq!(serialize_model(&back), once);
    }

    fn random_model(rng: &mut ChaCha8Rng) -> BehaviorModel {
        let n_appliances = rng.gen_range(1..5);
        let catalog: Vec<ApplianceId> = (0..n_appliances)
            .map(|i| id(&format!("App-{i}"), ["tv", "lamp", "stove"][i % 3]))
            .collect();
        let n_usages = rng.gen_range(0..12);
        let mut usages = Vec::new();
        let model_day =
            NaiveDate::from_ymd_opt(2024, rng.gen_range(1..13), rng.gen_range(1..29)).unwrap();
        for _ in 0..n_usages {
            let appliance = catalog[rng.gen_range(0..catalog.len())].clone();
            let start = rng.gen_range(0..86_300u32);
            let stop = (start + rng.gen_range(1..2000u32)).min(86_400);
            usages.push(UsageInterval::new(model_day, appliance, start, stop).unwrap());
        }
        // Names with characters the serializer must escape.
        let user = ["Rune", "A & B", "\"Olga\" <admin>", "Li'l"]
            [rng.gen_range(0..4)]
        .to_string();
        build_model(&user, "home-7", usages, &catalog).unwrap()
    }

    #[test]
    fn random_models_round_trip_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for round in 0..100 {
            let model = random_model(&mut rng);
            let once = serialize_model(&model);
            let back = deserialize_model(&once).unwrap();
            assert_eq!(back, model, "round {round}");
            assert_eq!(serialize_model(&back), once, "round {round}");
            // A round-tripped model renders identically too.
            let template = ReportTemplate::default();
            assert_eq!(
                render_report(&back, &template).unwrap(),
                render_report(&model, &template).unwrap(),
                "round {round}"
            );
        }
    }

    #[test]
    fn escaping_survives_hostile_names() {
        let raw = "A & \"B\" <C> 'D'";
        assert_eq!(unescape(&escape(raw)).unwrap(), raw);
        let model = build_model(raw, "h", vec![], &[id("A", "x")]).unwrap();
        let doc = serialize_model(&model);
        assert_eq!(deserialize_model(&doc).unwrap().user(), raw);
    }

    #[test]
    fn malformed_documents_are_rejected() {
        for (doc, why) in [
            ("<behavior user=\"R\">", "missing home / unclosed"),
            ("<other user=\"R\" home=\"h\"/>", "wrong root"),
            (
                "<behavior user=\"R\" home=\"h\"><usage appliance=\"X\" day=\"2024-01-01\" start=\"0\" stop=\"5\"/></behavior>",
                "usage references undeclared appliance",
            ),
            ("<behavior user=\"R\" home=\"h\"></wrong>", "mismatched close"),
            ("<behavior user=\"R\" home=\"h\"/>trailing", "trailing content"),
        ] {
            assert!(deserialize_model(doc).is_err(), "{why}: {doc}");
        }
    }
}
