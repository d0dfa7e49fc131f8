//! Tab-separated corpus files.
//!
//! First row is a header naming the columns; no quoting, so tabs and newlines
//! cannot appear inside a field. Columns may come in any order and unknown
//! extra columns are ignored.

use std::collections::HashMap;
use std::path::Path;

use super::{CorpusError, Language, Source, Task1Label, Task2Label, TextRecord};

/// Columns every corpus file must carry.
pub const COLUMNS: [&str; 5] = ["test_case", "id", "source", "language", "text"];
/// Columns required when labels are expected.
pub const LABEL_COLUMNS: [&str; 2] = ["task1", "task2"];

const TEST_CASE: &str = "EXIST2021";

pub fn load_tsv(path: impl AsRef<Path>, expect_labels: bool) -> Result<Vec<TextRecord>, CorpusError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_tsv(&bytes, expect_labels)
}

/// Parses corpus bytes. Row numbers in errors are 1-based file line numbers.
pub fn parse_tsv(bytes: &[u8], expect_labels: bool) -> Result<Vec<TextRecord>, CorpusError> {
    let mut lines = bytes.split(|&b| b == b'\n').enumerate().map(|(i, raw)| {
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        std::str::from_utf8(raw)
            .map(|s| (i + 1, s))
            .map_err(|_| CorpusError::Encoding { line: i + 1 })
    });

    let header = match lines.next() {
        Some(h) => h?.1,
        None => return Err(CorpusError::MissingColumn(COLUMNS[0])),
    };
    let names: Vec<String> = header.split('\t').map(|c| c.trim().to_ascii_lowercase()).collect();
    let mut position = HashMap::new();
    for (i, name) in names.iter().enumerate() {
        if position.insert(name.as_str(), i).is_some() {
            return Err(CorpusError::DuplicateColumn(name.clone()));
        }
    }
    let column = |name: &'static str| position.get(name).copied().ok_or(CorpusError::MissingColumn(name));
    let id_col = column("id")?;
    let source_col = column("source")?;
    let language_col = column("language")?;
    let text_col = column("text")?;
    column("test_case")?;
    let label_cols = if expect_labels {
        Some((column("task1")?, column("task2")?))
    } else {
        None
    };

    let mut records = Vec::new();
    for line in lines {
        let (row, line) = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != names.len() {
            return Err(CorpusError::FieldCount {
                row,
                expected: names.len(),
                found: fields.len(),
            });
        }
        let label_err = |source| CorpusError::Label { row, source };
        let source: Source = fields[source_col].parse().map_err(label_err)?;
        let language: Language = fields[language_col].parse().map_err(label_err)?;
        let (task1, task2) = match label_cols {
            Some((c1, c2)) => (
                optional::<Task1Label>(fields[c1]).map_err(label_err)?,
                optional::<Task2Label>(fields[c2]).map_err(label_err)?,
            ),
            None => (None, None),
        };
        let record = TextRecord::new(fields[id_col], source, language, fields[text_col], task1, task2)
            .map_err(|source| CorpusError::Record { row, source })?;
        records.push(record);
    }
    Ok(records)
}

fn optional<T: std::str::FromStr>(field: &str) -> Result<Option<T>, T::Err> {
    if field.trim().is_empty() {
        Ok(None)
    } else {
        field.parse().map(Some)
    }
}

/// Serializes records in the same column layout [`parse_tsv`] reads.
/// Missing labels are written as empty fields.
pub fn write_tsv(records: &[TextRecord], include_labels: bool) -> Result<String, CorpusError> {
    let mut out = COLUMNS.join("\t");
    if include_labels {
        for c in LABEL_COLUMNS {
            out.push('\t');
            out.push_str(c);
        }
    }
    out.push('\n');
    for r in records {
        if r.text.contains(['\t', '\n', '\r']) || r.id.contains(['\t', '\n', '\r']) {
            return Err(CorpusError::Unwritable { id: r.id.clone() });
        }
        out.push_str(&[TEST_CASE, &r.id, r.source.as_str(), r.language.as_str(), &r.text].join("\t"));
        if include_labels {
            out.push('\t');
            out.push_str(r.task1.map(Task1Label::as_str).unwrap_or(""));
            out.push('\t');
            out.push_str(r.task2.map(Task2Label::as_str).unwrap_or(""));
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HEADER: &str = "test_case\tid\tsource\tlanguage\ttext\ttask1\ttask2\n";

    #[test]
    fn three_rows_in_order() {
        let data = format!(
            "{HEADER}EXIST2021\t1\ttwitter\ten\tfirst\tsexist\tobjectification\n\
             EXIST2021\t2\tgab\tes\tsegundo\tnon-sexist\tnon-sexist\n\
             EXIST2021\t3\ttwitter\ten\tthird\tnon-sexist\tnon-sexist\n"
        );
        let rs = parse_tsv(data.as_bytes(), true).unwrap();
        assert_eq!(rs.len(), 3);
        assert_eq!(rs.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), ["1", "2", "3"]);
        assert_eq!(rs[0].task1, Some(Task1Label::Sexist));
        assert_eq!(rs[0].task2, Some(Task2Label::Objectification));
        assert_eq!(rs[1].source, Source::Gab);
        assert_eq!(rs[1].language, Language::Es);
    }

    #[test]
    fn official_uppercase_casing_is_accepted() {
        let data = format!(
            "{HEADER}EXIST2021\t7\ttwitter\ten\tt\tsexist\tOBJECTIFICATION\n\
             EXIST2021\t8\ttwitter\ten\tt\tsexist\tMISOGYNY-NON-SEXUAL-VIOLENCE\n"
        );
        let rs = parse_tsv(data.as_bytes(), true).unwrap();
        assert_eq!(rs[0].task2, Some(Task2Label::Objectification));
        assert_eq!(rs[1].task2, Some(Task2Label::MisogynyNonSexualViolence));
    }

    #[test]
    fn missing_column_is_named() {
        let data = "test_case\tid\tsource\ttext\ttask1\ttask2\n";
        let err = parse_tsv(data.as_bytes(), true).unwrap_err();
        assert!(matches!(err, CorpusError::MissingColumn("language")));
        let data = "test_case\tid\tsource\tlanguage\ttext\ttask1\n";
        assert!(matches!(
            parse_tsv(data.as_bytes(), true).unwrap_err(),
            CorpusError::MissingColumn("task2")
        ));
        // Label columns are only required when labels are expected.
        assert!(parse_tsv(data.as_bytes(), false).unwrap().is_empty());
    }

    #[test]
    fn unknown_label_reports_row() {
        let data = format!(
            "{HEADER}EXIST2021\t1\ttwitter\ten\tok\tsexist\tobjectification\n\
             EXIST2021\t2\ttwitter\ten\tbad\tsexist\tsarcasm\n"
        );
        match parse_tsv(data.as_bytes(), true).unwrap_err() {
            CorpusError::Label { row, source } => {
                assert_eq!(row, 3);
                assert_eq!(source.value, "sarcasm");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn malformed_utf8_is_an_encoding_error() {
        let mut data = HEADER.as_bytes().to_vec();
        data.extend_from_slice(b"EXIST2021\t1\ttwitter\ten\t\xff\xfe\tsexist\tobjectification\n");
        assert!(matches!(
            parse_tsv(&data, true).unwrap_err(),
            CorpusError::Encoding { line: 2 }
        ));
    }

    #[test]
    fn embedded_tab_is_rejected() {
        let data = format!("{HEADER}EXIST2021\t1\ttwitter\ten\ta\tb\tsexist\tobjectification\n");
        assert!(matches!(
            parse_tsv(data.as_bytes(), true).unwrap_err(),
            CorpusError::FieldCount {
                row: 2,
                expected: 7,
                found: 8
            }
        ));
    }

    #[test]
    fn crlf_and_column_order() {
        let data = "text\tlanguage\tid\tsource\ttest_case\r\nhola\tes\tx1\ttwitter\tEXIST2021\r\n";
        let rs = parse_tsv(data.as_bytes(), false).unwrap();
        assert_eq!(rs[0].text, "hola");
        assert_eq!(rs[0].id, "x1");
        assert_eq!(rs[0].task1, None);
    }

    #[test]
    fn writer_rejects_unwritable_text() {
        let mut r = TextRecord::new("1", Source::Gab, Language::En, "fine", None, None).unwrap();
        r.text = "has\ttab".into();
        assert!(matches!(write_tsv(&[r], false), Err(CorpusError::Unwritable { .. })));
    }

    proptest! {
        #[test]
        fn text_round_trips_byte_exactly(
            texts in proptest::collection::vec("[^\t\n\r]{1,40}", 1..8),
            labeled in any::<bool>(),
        ) {
            let records: Vec<TextRecord> = texts
                .iter()
                .enumerate()
                .filter(|(_, t)| !t.trim().is_empty())
                .map(|(i, t)| {
                    let (t1, t2) = if labeled && i % 2 == 0 {
                        (Some(Task1Label::Sexist), Some(Task2Label::SexualViolence))
                    } else if labeled {
                        (Some(Task1Label::NonSexist), Some(Task2Label::NonSexist))
                    } else {
                        (None, None)
                    };
                    TextRecord::new(format!("id{i}"), Source::Twitter, Language::Es, t.clone(), t1, t2).unwrap()
                })
                .collect();
            let written = write_tsv(&records, labeled).unwrap();
            let back = parse_tsv(written.as_bytes(), labeled).unwrap();
            prop_assert_eq!(back, records);
        }
    }
}
