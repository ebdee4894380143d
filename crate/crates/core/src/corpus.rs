//! Two-column corpus I/O: one `surface<TAB>tag` token per line, blank line
//! between sentences, UTF-8. Reader errors carry the 1-based line number.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Result, SmError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    /// Gold tag when reading training/evaluation data; `None` for raw input.
    pub tag: Option<String>,
}

impl Token {
    pub fn new(surface: impl Into<String>, tag: impl Into<String>) -> Self {
        Token { surface: surface.into(), tag: Some(tag.into()) }
    }

    pub fn untagged(surface: impl Into<String>) -> Self {
        Token { surface: surface.into(), tag: None }
    }
}

/// A non-empty ordered token sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(SmError::InvalidInput("sentence must have at least one token".into()));
        }
        Ok(Sentence { tokens })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TaggedCorpus {
    pub sentences: Vec<Sentence>,
}

impl TaggedCorpus {
    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(|s| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.sentences.iter().flat_map(|s| s.tokens.iter())
    }
}

fn parse_line(line: &str, number: usize, require_tag: bool) -> Result<Token> {
    match line.split_once('\t') {
        Some((surface, tag)) => {
            if surface.is_empty() {
                return Err(SmError::Parse { line: number, message: "empty surface form".into() });
            }
            if tag.is_empty() {
                return Err(SmError::Parse { line: number, message: "empty tag".into() });
            }
            Ok(Token::new(surface, tag))
        }
        None if require_tag => Err(SmError::Parse {
            line: number,
            message: "missing tab separator between surface and tag".into(),
        }),
        None => Ok(Token::untagged(line)),
    }
}

fn read_corpus<R: BufRead>(reader: R, require_tag: bool) -> Result<TaggedCorpus> {
    let mut sentences = Vec::new();
    let mut current: Vec<Token> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let number = idx + 1;
        let line = line.map_err(SmError::Io)?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            if !current.is_empty() {
                sentences.push(Sentence { tokens: std::mem::take(&mut current) });
            }
            continue;
        }
        current.push(parse_line(line, number, require_tag)?);
    }
    if !current.is_empty() {
        sentences.push(Sentence { tokens: current });
    }
    Ok(TaggedCorpus { sentences })
}

/// Reads a training/evaluation corpus; every token line must carry a tag.
pub fn read_tagged<R: BufRead>(reader: R) -> Result<TaggedCorpus> {
    read_corpus(reader, true)
}

/// Reads tagger input: tags are optional and preserved when present.
pub fn read_input<R: BufRead>(reader: R) -> Result<TaggedCorpus> {
    read_corpus(reader, false)
}

pub fn read_tagged_path(path: impl AsRef<Path>) -> Result<TaggedCorpus> {
    read_tagged(BufReader::new(File::open(path)?))
}

pub fn read_input_path(path: impl AsRef<Path>) -> Result<TaggedCorpus> {
    read_input(BufReader::new(File::open(path)?))
}

/// Writes sentences in the same two-column format, blank line between
/// sentences. Tokens without tags are written as bare surfaces.
pub fn write_corpus<W: Write>(mut writer: W, corpus: &TaggedCorpus) -> Result<()> {
    for (si, sentence) in corpus.sentences.iter().enumerate() {
        if si > 0 {
            writeln!(writer)?;
        }
        for token in &sentence.tokens {
            match &token.tag {
                Some(tag) => writeln!(writer, "{}\t{}", token.surface, tag)?,
                None => writeln!(writer, "{}", token.surface)?,
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn reads_sentences_split_on_blank_lines() {
        let text = "the\tDT\ncat\tNN\n\nsat\tVBD\n";
        let corpus = read_tagged(Cursor::new(text)).unwrap();
        assert_eq!(corpus.sentences.len(), 2);
        assert_eq!(corpus.sentences[0].len(), 2);
        assert_eq!(corpus.sentences[1].tokens[0], Token::new("sat", "VBD"));
    }

    #[test]
    fn reports_line_number_of_malformed_line() {
        let text = "the\tDT\ncat\n";
        let err = read_tagged(Cursor::new(text)).unwrap_err();
        match err {
            SmError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_empty_surface_and_tag() {
        assert!(matches!(
            read_tagged(Cursor::new("\tDT\n")).unwrap_err(),
            SmError::Parse { line: 1, .. }
        ));
        assert!(matches!(
            read_tagged(Cursor::new("the\t\n")).unwrap_err(),
            SmError::Parse { line: 1, .. }
        ));
    }

    #[test]
    fn input_mode_accepts_untagged_lines() {
        let corpus = read_input(Cursor::new("the\ncat\tNN\n")).unwrap();
        assert_eq!(corpus.sentences[0].tokens[0], Token::untagged("the"));
        assert_eq!(corpus.sentences[0].tokens[1], Token::new("cat", "NN"));
    }

    #[test]
    fn surfaces_may_contain_spaces() {
        let corpus = read_tagged(Cursor::new("New York\tNNP\n")).unwrap();
        assert_eq!(corpus.sentences[0].tokens[0].surface, "New York");
    }

    #[test]
    fn write_read_round_trip() {
        let text = "the\tDT\ncat\tNN\n\nsat\tVBD\n";
        let corpus = read_tagged(Cursor::new(text)).unwrap();
        let mut out = Vec::new();
        write_corpus(&mut out, &corpus).unwrap();
        let again = read_tagged(Cursor::new(out)).unwrap();
        assert_eq!(corpus, again);
    }

    #[test]
    fn empty_input_is_empty_corpus() {
        let corpus = read_tagged(Cursor::new("")).unwrap();
        assert!(corpus.is_empty());
        assert_eq!(corpus.token_count(), 0);
    }
}
