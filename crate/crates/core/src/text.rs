//! Title normalization and edit-distance similarity.

use std::sync::OnceLock;

use regex::Regex;
use unicode_normalization::UnicodeNormalization;

fn leader_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // a run of leader characters (or a wide gap) with an optional page number, at the end
    RE.get_or_init(|| {
        Regex::new(r"(?:\s*[.．·•…‥⋯_\-–—]{2,}|\s*…|\s{2,}|\t)\s*\d*\s*$").unwrap()
    })
}

fn numbering_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let cjk_num = "[一二三四五六七八九十百零〇]";
        let roman = "(?:x{0,3}(?:ix|iv|v?i{0,3}))";
        let boundary = r"(?:\s|$|\p{Han})";
        // (token, what must follow it); only the token is removed
        let alts = [
            // 1.2 / 1.2.3
            (r"\d+(?:[.．]\d+)+[.．、)）:]?".to_string(), boundary.to_string()),
            // 1. / 1、 / 1)
            (r"\d{1,3}[.．、)）:]".to_string(), r"(?:\s|$|\p{Han}|\p{L})".to_string()),
            // 3 Governance
            (r"\d{1,2}".to_string(), r"\s".to_string()),
            // (1) （一） (iv) (a)
            (format!(r"[(（](?:\d{{1,3}}|{cjk_num}{{1,3}}|(?i:{roman})|[A-Za-z])[)）]"), String::new()),
            // 一、 十二．
            (format!(r"{cjk_num}{{1,3}}[、.．]"), String::new()),
            // 第三章 / 第2节
            (format!(r"第(?:\d{{1,3}}|{cjk_num}{{1,3}})[章节部分篇]"), String::new()),
            // IV. / iv) ; a delimiter is required so words like "Mix" survive
            (format!(r"(?i:{roman})[.．)）:、]"), String::new()),
            // A. / b)
            (r"[A-Za-z][.)]".to_string(), r"\s".to_string()),
            // bullets
            (r"[•●■□◆◇▪▶►\-–—*·]".to_string(), String::new()),
        ];
        let body: Vec<String> = alts.iter().map(|(tok, follow)| format!("({tok}){follow}")).collect();
        Regex::new(&format!("^(?:{})", body.join("|"))).unwrap()
    })
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Byte length of a leading numbering token, if any.
fn numbering_token_len(s: &str) -> Option<usize> {
    let caps = numbering_re().captures(s)?;
    caps.iter().skip(1).flatten().next().map(|m| m.end()).filter(|&e| e > 0)
}

/// NFC, leader dots and trailing page numbers removed, whitespace collapsed,
/// leading numbering tokens removed, lowercased. Idempotent.
pub fn normalize_title(s: &str) -> String {
    let mut t: String = s.nfc().collect();
    loop {
        let stripped = leader_re().replace(&t, "").into_owned();
        if stripped == t {
            break;
        }
        t = stripped;
    }
    t = collapse_ws(&t);
    while let Some(end) = numbering_token_len(&t) {
        t = collapse_ws(&t[end..]);
    }
    t.to_lowercase().nfc().collect()
}

/// Levenshtein distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - d / max(|a|, |b|)`; two empty strings are identical.
pub fn levenshtein_similarity(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

/// Either string contains the other, and the contained one has at least
/// `min_len` characters.
pub fn contains_either(a: &str, b: &str, min_len: usize) -> bool {
    let (short, long) = if a.chars().count() <= b.chars().count() {
        (a, b)
    } else {
        (b, a)
    };
    short.chars().count() >= min_len && long.contains(short)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toc_line() {
        assert_eq!(normalize_title("1.2  Energy Use ...... 14"), "energy use");
    }

    #[test]
    fn numbering_variants() {
        for (raw, want) in [
            ("一、公司治理", "公司治理"),
            ("（三）节能减排", "节能减排"),
            ("第二章 环境保护", "环境保护"),
            ("IV. Governance", "governance"),
            ("3 Governance", "governance"),
            ("A. About this Report", "about this report"),
            ("(b) Water", "water"),
            ("• Highlights", "highlights"),
            ("2.1.3 Waste", "waste"),
            ("1.5°C pathway", "1.5°c pathway"),
            ("2023 Highlights", "2023 highlights"),
            ("Mix of energy", "mix of energy"),
            ("Scope 3 emissions", "scope 3 emissions"),
            ("About Us …… 3", "about us"),
            ("Climate\u{3000}Governance", "climate governance"),
        ] {
            assert_eq!(normalize_title(raw), want, "{raw}");
        }
    }

    #[test]
    fn idempotent_on_examples() {
        for s in ["", "energy use", "1. 2. IV. Energy", "目录", "  A  B  ", "x ....", "ⅰ"] {
            let once = normalize_title(s);
            assert_eq!(normalize_title(&once), once, "{s:?}");
        }
    }

    #[test]
    fn nfc_composes() {
        assert_eq!(normalize_title("Cafe\u{301}"), "café");
    }

    #[test]
    fn edit_distance_examples() {
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert!((levenshtein_similarity("kitten", "sitting") - (1.0 - 3.0 / 7.0)).abs() < 1e-15);
        assert_eq!(levenshtein_similarity("abc", ""), 0.0);
        assert_eq!(levenshtein_similarity("", ""), 1.0);
        assert_eq!(levenshtein_similarity("碳排放", "碳排放"), 1.0);
        assert_eq!(levenshtein("碳排放", "碳减排"), 2);
    }

    #[test]
    fn containment_length_floor() {
        assert!(contains_either("climate governance", "climate governance framework", 4));
        assert!(!contains_either("能源", "能源管理", 4));
        assert!(contains_either("能源管理", "集团能源管理体系", 4));
    }
}
