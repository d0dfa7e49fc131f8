//! Masking of user handles and links.
//!
//! Matching rules:
//!
//! * a **mention** is `@` followed by 1 to 30 ASCII word characters
//!   (`[A-Za-z0-9_]`) that are not followed by a further word character. The
//!   character before the `@` must not be alphanumeric, so `a@b.com` is left
//!   alone while `(@maria)` is masked. A handle that begins with one of the
//!   two mask tokens is not a mention, so `@__URL__` survives a second pass
//!   unchanged.
//! * a **URL** starts with `http://`, `https://` or `www.` (any case) at a
//!   position not preceded by a word character, and runs to the next
//!   whitespace.
//!
//! "Preceded by" always refers to the text produced so far, which is what
//! makes the function idempotent: a second pass sees exactly the contexts the
//! first pass decided on.

pub const MENTION_TOKEN: &str = "__mention__";
pub const URL_TOKEN: &str = "__URL__";

const MAX_HANDLE: usize = 30;
const URL_PREFIXES: [&str; 3] = ["http://", "https://", "www."];

fn is_word(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Byte length of the URL starting at `rest`, if one starts there.
fn url_len(rest: &str) -> Option<usize> {
    let starts = URL_PREFIXES
        .iter()
        .any(|p| rest.get(..p.len()).is_some_and(|head| head.eq_ignore_ascii_case(p)));
    starts.then(|| rest.find(char::is_whitespace).unwrap_or(rest.len()))
}

/// Byte length of the mention (including `@`) starting at `rest`, if any.
fn mention_len(rest: &str) -> Option<usize> {
    let handle = rest.strip_prefix('@')?;
    let run = handle.find(|c: char| !is_word(c)).unwrap_or(handle.len());
    let masked = [MENTION_TOKEN, URL_TOKEN].iter().any(|t| handle.starts_with(t));
    ((1..=MAX_HANDLE).contains(&run) && !masked).then_some(run + 1)
}

/// Replaces every mention with `__mention__` and every URL with `__URL__`.
pub fn mask_mentions_urls(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < text.len() {
        let rest = &text[i..];
        let prev = out.chars().next_back();
        if !prev.is_some_and(is_word) {
            if let Some(n) = url_len(rest) {
                out.push_str(URL_TOKEN);
                i += n;
                continue;
            }
        }
        if !prev.is_some_and(|c| c.is_alphanumeric()) {
            if let Some(n) = mention_len(rest) {
                out.push_str(MENTION_TOKEN);
                i += n;
                continue;
            }
        }
        let c = rest.chars().next().unwrap();
        out.push(c);
        i += c.len_utf8();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn basic_cases() {
        assert_eq!(
            mask_mentions_urls("@maria stop https://t.co/abc now"),
            "__mention__ stop __URL__ now"
        );
        assert_eq!(mask_mentions_urls("no handles here"), "no handles here");
        assert_eq!(
            mask_mentions_urls("email a@b.com vs @b"),
            "email a@b.com vs __mention__"
        );
    }

    /// Hand-labeled inputs covering the edges of both grammars.
    const LABELED: &[(&str, &str)] = &[
        ("", ""),
        ("@", "@"),
        ("@ ", "@ "),
        ("@a", "__mention__"),
        ("@_", "__mention__"),
        ("@123", "__mention__"),
        ("hi @bob!", "hi __mention__!"),
        ("(@bob)", "(__mention__)"),
        ("@bob,@amy", "__mention__,__mention__"),
        ("@bob@amy", "__mention____mention__"),
        ("x@bob", "x@bob"),
        ("1@bob", "1@bob"),
        ("_@bob", "___mention__"),
        ("ñ@bob", "ñ@bob"),
        (".@bob", ".__mention__"),
        ("@bob's", "__mention__'s"),
        ("@bob-smith", "__mention__-smith"),
        ("@bob.smith", "__mention__.smith"),
        ("@josé", "__mention__é"),
        ("@ñandu", "@ñandu"),
        ("@aaaaaaaaaaaaaaaaaaaaaaaaaaaaaa", "__mention__"),
        ("@aaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa", "@aaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa"),
        ("@aaaaaaaaaaaaaaaaaaaaaaaaaaaaaa!", "__mention__!"),
        ("RT @user: hello", "RT __mention__: hello"),
        ("@@bob", "@__mention__"),
        ("email me at a@b.com", "email me at a@b.com"),
        ("@__URL__ hi", "@__URL__ hi"),
        ("https://t.co/abc", "__URL__"),
        ("HTTPS://T.CO/ABC", "__URL__"),
        ("www.example.com", "__URL__"),
        ("WWW.example.com/x", "__URL__"),
        ("go to www.x.org now", "go to __URL__ now"),
        ("see:https://t.co/x", "see:__URL__"),
        ("(https://t.co/x)", "(__URL__"),
        ("xhttps://t.co/x", "xhttps://t.co/x"),
        ("_www.x", "_www.x"),
        ("awww.cute", "awww.cute"),
        ("http:/x", "http:/x"),
        ("ftp://x.org", "ftp://x.org"),
        ("https://a https://b", "__URL__ __URL__"),
        ("https://a\thttps://b", "__URL__\t__URL__"),
        ("https://a\nnext", "__URL__\nnext"),
        ("https://t.co/@bob", "__URL__"),
        ("@bob https://t.co/x @amy", "__mention__ __URL__ __mention__"),
        ("@bob.www.x", "__mention__.__URL__"),
        ("__mention__ __URL__", "__mention__ __URL__"),
        ("@https://t.co", "__mention__://t.co"),
        ("¡@ana!", "¡__mention__!"),
        ("#tag @ana", "#tag __mention__"),
        ("emoji 😀@ana", "emoji 😀__mention__"),
    ];

    #[test]
    fn hand_labeled_corpus() {
        assert_eq!(LABELED.len(), 50);
        for (input, want) in LABELED {
            assert_eq!(mask_mentions_urls(input), *want, "input {input:?}");
        }
    }

    #[test]
    fn labeled_outputs_are_fixed_points() {
        for (_, want) in LABELED {
            assert_eq!(mask_mentions_urls(want), *want);
        }
    }

    proptest! {
        #[test]
        fn idempotent(s in "[@a_w.:/htps1ñ \t]{0,60}") {
            let once = mask_mentions_urls(&s);
            prop_assert_eq!(mask_mentions_urls(&once), once.clone());
        }

        #[test]
        fn identity_without_triggers(s in "[a-zA-Z0-9 ,.!?ñé]{0,60}") {
            prop_assume!(!s.to_ascii_lowercase().contains("www."));
            prop_assert_eq!(mask_mentions_urls(&s), s);
        }

        #[test]
        fn whitespace_skeleton_preserved(words in proptest::collection::vec("[@a-z:/.]{1,12}", 0..8), seps in proptest::collection::vec("[ \t\n]{1,3}", 8)) {
            let mut s = String::new();
            for (w, sep) in words.iter().zip(&seps) {
                s.push_str(w);
                s.push_str(sep);
            }
            let ws = |t: &str| t.chars().filter(|c| c.is_whitespace()).collect::<String>();
            prop_assert_eq!(ws(&mask_mentions_urls(&s)), ws(&s));
        }
    }
}
