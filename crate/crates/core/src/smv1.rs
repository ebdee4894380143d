//! Versioned text serialization of a trained tagger. The file starts with the
//! `SMV1` header, carries the alphabet, configuration, lexicon and one stanza
//! per pipeline stage, with classifier payloads referenced by name. Weights
//! are printed with 17 significant digits so that save -> load -> save is
//! byte-identical and reloaded models predict identically.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use crate::alphabet::LabelAlphabet;
use crate::error::{Result, SmError};
use crate::features::Lexicon;
use crate::learners::{CountClassifier, FeatureInterner, SnowNetwork, WinnowParams};
use crate::model::CombineMode;
use crate::tagger::{
    assemble, FinalClassifier, TaggerConfig, TrainedTagger, TrainingMode, TrainingSummary,
};

pub const HEADER: &str = "SMV1";

/// 17 significant digits: enough to round-trip any f64 exactly.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn save_path(tagger: &TrainedTagger, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(tagger, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_path(path: impl AsRef<Path>) -> Result<TrainedTagger> {
    read_model(BufReader::new(File::open(path)?))
}

pub fn save_string(tagger: &TrainedTagger) -> Result<String> {
    let mut buf = Vec::new();
    write_model(tagger, &mut buf)?;
    Ok(String::from_utf8(buf).expect("model text is UTF-8"))
}

pub fn load_string(text: &str) -> Result<TrainedTagger> {
    read_model(text.as_bytes())
}

pub fn write_model<W: Write>(tagger: &TrainedTagger, w: &mut W) -> Result<()> {
    let cfg = tagger.config();
    writeln!(w, "{HEADER}")?;
    writeln!(w, "combine\t{}", cfg.combine.as_str())?;
    writeln!(w, "training-mode\t{}", cfg.training_mode.as_str())?;
    writeln!(w, "classifier\t{}", cfg.final_classifier.as_str())?;
    writeln!(w, "baseline\t{}", if cfg.include_baseline { "on" } else { "off" })?;
    writeln!(w, "numeric\t{}", if cfg.numeric_exclusion { "on" } else { "off" })?;
    writeln!(w, "min-support\t{}", cfg.min_support)?;
    writeln!(w, "unknown-sim-folds\t{}", cfg.unknown_sim_folds)?;
    writeln!(w, "seed\t{}", cfg.seed)?;
    let p = &cfg.winnow;
    writeln!(
        w,
        "winnow\talpha={}\tbeta={}\ttheta={}\tw0={}\ttemp={}\tepochs={}\tdemote={}",
        fmt_f64(p.promotion),
        fmt_f64(p.demotion),
        fmt_f64(p.threshold),
        fmt_f64(p.initial_weight),
        fmt_f64(p.temperature),
        p.max_epochs,
        if p.demote_all { "all" } else { "top" },
    )?;

    writeln!(w, "alphabet\t{}", tagger.alphabet().len())?;
    for name in tagger.alphabet().names() {
        writeln!(w, "{name}")?;
    }

    let entries = tagger.lexicon().entries_sorted();
    writeln!(w, "lexicon\t{}", entries.len())?;
    for (word, tags) in entries {
        write!(w, "{word}")?;
        for (tag, count) in tags {
            write!(w, "\t{tag}:{count}")?;
        }
        writeln!(w)?;
    }

    writeln!(w, "stages\t{}", cfg.stage_order.len())?;
    for (name, eps) in &cfg.stage_order {
        writeln!(w, "stage\t{name}\tepsilon={}", fmt_f64(*eps))?;
    }

    write_counts(w, "cap", tagger.cap_filter(), tagger)?;
    write_counts(w, "suffix", tagger.suffix_filter(), tagger)?;
    write_network(w, tagger.network(), tagger)?;
    writeln!(w, "end")?;
    Ok(())
}

fn write_counts<W: Write>(
    w: &mut W,
    name: &str,
    cc: &CountClassifier,
    tagger: &TrainedTagger,
) -> Result<()> {
    // Rows sorted by feature name for a stable byte representation.
    let mut rows: Vec<(&str, Vec<(&str, u64)>)> = cc
        .rows()
        .map(|(f, row)| {
            let fname = tagger.interner().name(f).expect("interned feature");
            let cells: Vec<(&str, u64)> =
                row.iter().map(|(l, c)| (tagger.alphabet().name(*l), *c)).collect();
            (fname, cells)
        })
        .collect();
    rows.sort_unstable_by_key(|(f, _)| *f);
    writeln!(w, "payload\t{name}\t{}", rows.len())?;
    for (fname, cells) in rows {
        write!(w, "{fname}")?;
        for (tag, count) in cells {
            write!(w, "\t{tag}:{count}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn write_network<W: Write>(w: &mut W, net: &SnowNetwork, tagger: &TrainedTagger) -> Result<()> {
    writeln!(w, "payload\tfinal\t{}", net.nodes().len())?;
    for node in net.nodes() {
        let mut links: Vec<(&str, f64)> = node
            .weights()
            .map(|(f, weight)| (tagger.interner().name(f).expect("interned feature"), weight))
            .collect();
        links.sort_unstable_by_key(|(f, _)| *f);
        writeln!(w, "node\t{}\t{}", tagger.alphabet().name(node.label), links.len())?;
        for (fname, weight) in links {
            writeln!(w, "{fname}\t{}", fmt_f64(weight))?;
        }
    }
    Ok(())
}

struct Lines<R> {
    reader: R,
    number: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<Option<String>> {
        let mut buf = String::new();
        let n = self.reader.read_line(&mut buf)?;
        if n == 0 {
            return Ok(None);
        }
        self.number += 1;
        while buf.ends_with('\n') || buf.ends_with('\r') {
            buf.pop();
        }
        Ok(Some(buf))
    }

    fn expect_line(&mut self, what: &str) -> Result<String> {
        self.next_line()?.ok_or_else(|| SmError::Parse {
            line: self.number + 1,
            message: format!("unexpected end of file, expected {what}"),
        })
    }

    fn err(&self, message: impl Into<String>) -> SmError {
        SmError::Parse { line: self.number, message: message.into() }
    }
}

fn parse_kv<'a>(lines: &Lines<impl BufRead>, line: &'a str, key: &str) -> Result<&'a str> {
    let (k, v) = line
        .split_once('\t')
        .ok_or_else(|| lines.err(format!("expected `{key}<TAB>value`")))?;
    if k != key {
        return Err(lines.err(format!("expected key {key:?}, found {k:?}")));
    }
    Ok(v)
}

fn parse_usize(lines: &Lines<impl BufRead>, s: &str, what: &str) -> Result<usize> {
    s.parse().map_err(|_| lines.err(format!("invalid {what}: {s:?}")))
}

fn parse_f64(lines: &Lines<impl BufRead>, s: &str, what: &str) -> Result<f64> {
    s.parse().map_err(|_| lines.err(format!("invalid {what}: {s:?}")))
}

pub fn read_model<R: BufRead>(reader: R) -> Result<TrainedTagger> {
    let mut lines = Lines { reader, number: 0 };

    let header = lines.expect_line("header")?;
    if header != HEADER {
        return Err(SmError::VersionMismatch { expected: HEADER.into(), found: header });
    }

    let line = lines.expect_line("combine")?;
    let combine = CombineMode::parse(parse_kv(&lines, &line, "combine")?)
        .map_err(|e| lines.err(e.to_string()))?;
    let line = lines.expect_line("training-mode")?;
    let training_mode = TrainingMode::parse(parse_kv(&lines, &line, "training-mode")?)
        .map_err(|e| lines.err(e.to_string()))?;
    let line = lines.expect_line("classifier")?;
    let final_classifier = FinalClassifier::parse(parse_kv(&lines, &line, "classifier")?)
        .map_err(|e| lines.err(e.to_string()))?;
    let line = lines.expect_line("baseline")?;
    let include_baseline = parse_kv(&lines, &line, "baseline")? == "on";
    let line = lines.expect_line("numeric")?;
    let numeric_exclusion = parse_kv(&lines, &line, "numeric")? == "on";
    let line = lines.expect_line("min-support")?;
    let min_support = parse_usize(&lines, parse_kv(&lines, &line, "min-support")?, "min-support")? as u64;
    let line = lines.expect_line("unknown-sim-folds")?;
    let unknown_sim_folds =
        parse_usize(&lines, parse_kv(&lines, &line, "unknown-sim-folds")?, "fold count")? as u32;
    let line = lines.expect_line("seed")?;
    let seed = parse_usize(&lines, parse_kv(&lines, &line, "seed")?, "seed")? as u64;

    let line = lines.expect_line("winnow")?;
    let spec = parse_kv(&lines, &line, "winnow")?;
    let mut winnow = WinnowParams::default();
    for field in spec.split('\t') {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| lines.err(format!("malformed winnow field {field:?}")))?;
        match k {
            "alpha" => winnow.promotion = parse_f64(&lines, v, "alpha")?,
            "beta" => winnow.demotion = parse_f64(&lines, v, "beta")?,
            "theta" => winnow.threshold = parse_f64(&lines, v, "theta")?,
            "w0" => winnow.initial_weight = parse_f64(&lines, v, "w0")?,
            "temp" => winnow.temperature = parse_f64(&lines, v, "temp")?,
            "epochs" => winnow.max_epochs = parse_usize(&lines, v, "epochs")?,
            "demote" => winnow.demote_all = v == "all",
            other => return Err(lines.err(format!("unknown winnow field {other:?}"))),
        }
    }

    let line = lines.expect_line("alphabet")?;
    let label_count = parse_usize(&lines, parse_kv(&lines, &line, "alphabet")?, "label count")?;
    let mut names = Vec::with_capacity(label_count);
    for _ in 0..label_count {
        names.push(lines.expect_line("label name")?);
    }
    let alphabet =
        Arc::new(LabelAlphabet::new(names).map_err(|e| lines.err(e.to_string()))?);

    let line = lines.expect_line("lexicon")?;
    let word_count = parse_usize(&lines, parse_kv(&lines, &line, "lexicon")?, "word count")?;
    let mut lexicon = Lexicon::default();
    for _ in 0..word_count {
        let line = lines.expect_line("lexicon entry")?;
        let mut parts = line.split('\t');
        let word = parts.next().filter(|w| !w.is_empty()).ok_or_else(|| lines.err("empty word"))?;
        let mut any = false;
        for cell in parts {
            let (tag, count) = cell
                .rsplit_once(':')
                .ok_or_else(|| lines.err(format!("malformed lexicon cell {cell:?}")))?;
            let count = parse_usize(&lines, count, "count")? as u64;
            for _ in 0..count {
                lexicon.observe(word, tag);
            }
            any = true;
        }
        if !any {
            return Err(lines.err(format!("lexicon entry {word:?} has no tags")));
        }
    }

    let line = lines.expect_line("stages")?;
    let stage_count = parse_usize(&lines, parse_kv(&lines, &line, "stages")?, "stage count")?;
    let mut stage_order = Vec::with_capacity(stage_count);
    for _ in 0..stage_count {
        let line = lines.expect_line("stage")?;
        let mut parts = line.split('\t');
        if parts.next() != Some("stage") {
            return Err(lines.err("expected stage line"));
        }
        let name = parts.next().ok_or_else(|| lines.err("stage missing name"))?.to_string();
        let eps_field = parts.next().ok_or_else(|| lines.err("stage missing epsilon"))?;
        let eps = eps_field
            .strip_prefix("epsilon=")
            .ok_or_else(|| lines.err(format!("malformed stage field {eps_field:?}")))?;
        stage_order.push((name, parse_f64(&lines, eps, "epsilon")?));
    }

    let mut interner = FeatureInterner::new();
    let cap_filter = read_counts(&mut lines, "cap", min_support, &alphabet, &mut interner)?;
    let suffix_filter = read_counts(&mut lines, "suffix", min_support, &alphabet, &mut interner)?;

    let line = lines.expect_line("final payload")?;
    let mut parts = line.split('\t');
    if parts.next() != Some("payload") || parts.next() != Some("final") {
        return Err(lines.err("expected `payload\tfinal`"));
    }
    let node_count =
        parse_usize(&lines, parts.next().unwrap_or(""), "node count")?;
    if node_count != alphabet.len() {
        return Err(lines.err(format!(
            "network has {node_count} nodes for {} labels",
            alphabet.len()
        )));
    }
    let mut node_weights: Vec<(String, Vec<(String, f64)>)> = Vec::with_capacity(node_count);
    for _ in 0..node_count {
        let line = lines.expect_line("node")?;
        let mut parts = line.split('\t');
        if parts.next() != Some("node") {
            return Err(lines.err("expected node line"));
        }
        let label = parts.next().ok_or_else(|| lines.err("node missing label"))?.to_string();
        let link_count = parse_usize(&lines, parts.next().unwrap_or(""), "link count")?;
        let mut links = Vec::with_capacity(link_count);
        for _ in 0..link_count {
            let line = lines.expect_line("weight")?;
            let (fname, weight) = line
                .split_once('\t')
                .ok_or_else(|| lines.err("expected `feature<TAB>weight`"))?;
            links.push((fname.to_string(), parse_f64(&lines, weight, "weight")?));
        }
        node_weights.push((label, links));
    }

    let line = lines.expect_line("end")?;
    if line != "end" {
        return Err(lines.err("expected end marker"));
    }

    let mut network = SnowNetwork::new(alphabet.clone(), winnow.clone(), Arc::new(FeatureInterner::new()));
    for (label, links) in node_weights {
        let id = alphabet
            .id(&label)
            .ok_or_else(|| lines.err(format!("node label {label:?} not in alphabet")))?;
        for (fname, weight) in links {
            let fid = interner.intern(&fname);
            network.node_mut(id).set_weight(fid, weight);
        }
    }
    let interner = Arc::new(interner);
    // The network was created with a placeholder interner before all names
    // were known; rebuild it with the final one.
    let mut final_network = SnowNetwork::new(alphabet.clone(), winnow.clone(), interner.clone());
    for node in network.nodes() {
        for (f, weight) in node.weights() {
            final_network.node_mut(node.label).set_weight(f, weight);
        }
    }

    let config = TaggerConfig {
        stage_order,
        combine,
        training_mode,
        final_classifier,
        winnow,
        auto_initial_weight: false,
        include_baseline,
        numeric_exclusion,
        min_support,
        unknown_sim_folds,
        seed,
        tags: Some(alphabet.names().map(|s| s.to_string()).collect()),
    };

    assemble(
        alphabet,
        lexicon,
        interner,
        Arc::new(cap_filter),
        Arc::new(suffix_filter),
        Arc::new(final_network),
        config,
        TrainingSummary::default(),
    )
}

fn read_counts<R: BufRead>(
    lines: &mut Lines<R>,
    expected: &str,
    min_support: u64,
    alphabet: &LabelAlphabet,
    interner: &mut FeatureInterner,
) -> Result<CountClassifier> {
    let line = lines.expect_line("payload")?;
    let mut parts = line.split('\t');
    if parts.next() != Some("payload") {
        return Err(lines.err("expected payload line"));
    }
    let name = parts.next().unwrap_or("");
    if name != expected {
        return Err(lines.err(format!("expected payload {expected:?}, found {name:?}")));
    }
    let rows = parse_usize(lines, parts.next().unwrap_or(""), "row count")?;
    let mut cc = CountClassifier::new(min_support);
    let mut table: BTreeMap<String, Vec<(String, u64)>> = BTreeMap::new();
    for _ in 0..rows {
        let line = lines.expect_line("count row")?;
        let mut parts = line.split('\t');
        let fname =
            parts.next().filter(|f| !f.is_empty()).ok_or_else(|| lines.err("empty feature"))?;
        let mut cells = Vec::new();
        for cell in parts {
            let (tag, count) = cell
                .rsplit_once(':')
                .ok_or_else(|| lines.err(format!("malformed count cell {cell:?}")))?;
            cells.push((tag.to_string(), parse_usize(lines, count, "count")? as u64));
        }
        table.insert(fname.to_string(), cells);
    }
    for (fname, cells) in table {
        let fid = interner.intern(&fname);
        for (tag, count) in cells {
            let label = alphabet
                .id(&tag)
                .ok_or_else(|| lines.err(format!("count tag {tag:?} not in alphabet")))?;
            cc.add_count(fid, label, count);
        }
    }
    Ok(cc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::read_tagged;
    use crate::tagger::train;
    use std::io::Cursor;

    fn toy_tagger() -> TrainedTagger {
        let text = "\
the\tDT\ncat\tNN\nsat\tVBD\n\n\
Running\tVBG\nis\tVBZ\nfun\tJJ\n\n\
the\tDT\ndog\tNN\nis\tVBZ\nrunning\tVBG\n";
        let corpus = read_tagged(Cursor::new(text)).unwrap();
        train(&corpus, TaggerConfig::default()).unwrap()
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let tagger = toy_tagger();
        let first = save_string(&tagger).unwrap();
        let reloaded = load_string(&first).unwrap();
        let second = save_string(&reloaded).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn reloaded_tagger_predicts_identically() {
        let tagger = toy_tagger();
        let reloaded = load_string(&save_string(&tagger).unwrap()).unwrap();
        let sentence = crate::corpus::Sentence::new(vec![
            crate::corpus::Token::untagged("the"),
            crate::corpus::Token::untagged("blorping"),
            crate::corpus::Token::untagged("Cats"),
        ])
        .unwrap();
        let a: Vec<String> =
            tagger.tag_sentence(&sentence).unwrap().into_iter().map(|t| t.tag).collect();
        let b: Vec<String> =
            reloaded.tag_sentence(&sentence).unwrap().into_iter().map(|t| t.tag).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn wrong_header_is_a_version_error() {
        match load_string("SMV9\n") {
            Err(SmError::VersionMismatch { found, .. }) => assert_eq!(found, "SMV9"),
            other => panic!("expected version mismatch, got {other:?}"),
        }
    }

    #[test]
    fn truncated_file_reports_line() {
        let tagger = toy_tagger();
        let text = save_string(&tagger).unwrap();
        let cut: String = text.lines().take(6).collect::<Vec<_>>().join("\n");
        match load_string(&cut) {
            Err(SmError::Parse { line, .. }) => assert!(line >= 6),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn garbled_stanza_reports_line() {
        let tagger = toy_tagger();
        let mut text = save_string(&tagger).unwrap();
        text = text.replacen("winnow\talpha=", "winnow\tzzz=", 1);
        assert!(matches!(load_string(&text), Err(SmError::Parse { .. })));
    }
}
