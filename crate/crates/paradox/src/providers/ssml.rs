//! SSML construction for intonation control: a prosody contour directive
//! that forces a rising or falling terminal pitch.

use crate::audio::ContourLabel;
use crate::error::{Error, Result};
use crate::providers::VoiceSpec;

/// Pitch offsets (percent) at the 0%/50%/100% contour anchors.
const RISE_ANCHORS: [i32; 3] = [-40, 0, 40];
const FALL_ANCHORS: [i32; 3] = [40, 0, -40];

/// Render an SSML document whose prosody contour encodes the requested
/// terminal intonation. The text must be non-empty and punctuation-free
/// (script prompts for intonation forbid punctuation so the contour is not
/// broken up by the synthesizer's phrasing).
pub fn render_ssml(text: &str, contour: ContourLabel, voice: &VoiceSpec) -> Result<String> {
    if text.trim().is_empty() {
        return Err(Error::invalid("ssml text must be non-empty"));
    }
    if text.chars().any(|c| c.is_ascii_punctuation()) {
        return Err(Error::invalid("intonation text must not contain punctuation"));
    }
    let anchors = match contour {
        ContourLabel::Rising => RISE_ANCHORS,
        ContourLabel::Falling => FALL_ANCHORS,
        ContourLabel::Indeterminate => {
            return Err(Error::invalid("contour must be rising or falling"));
        }
    };
    let contour_attr = format!(
        "(0%,{}{}%) (50%,{}{}%) (100%,{}{}%)",
        sign(anchors[0]),
        anchors[0].abs(),
        sign(anchors[1]),
        anchors[1].abs(),
        sign(anchors[2]),
        anchors[2].abs()
    );
    Ok(format!(
        r#"<speak version="1.0" xmlns="http://www.w3.org/2001/10/synthesis" xml:lang="en-US"><voice name="{}"><prosody contour="{}">{}</prosody></voice></speak>"#,
        escape_xml(&voice.voice_id),
        contour_attr,
        escape_xml(text.trim())
    ))
}

fn sign(v: i32) -> &'static str {
    if v >= 0 {
        "+"
    } else {
        "-"
    }
}

pub fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            other => out.push(other),
        }
    }
    out
}

/// Pull the `(pos%,±off%)` anchor list out of a rendered document. Used by
/// the stub synthesizer and by structural tests.
pub fn parse_contour_anchors(ssml: &str) -> Option<Vec<(f64, f64)>> {
    let start = ssml.find("contour=\"")? + "contour=\"".len();
    let end = start + ssml[start..].find('"')?;
    let mut anchors = Vec::new();
    for part in ssml[start..end].split(')') {
        let part = part.trim().trim_start_matches('(');
        if part.is_empty() {
            continue;
        }
        let (pos, off) = part.split_once(',')?;
        let pos: f64 = pos.trim().trim_end_matches('%').parse().ok()?;
        let off: f64 = off.trim().trim_end_matches('%').parse().ok()?;
        anchors.push((pos / 100.0, off / 100.0));
    }
    if anchors.is_empty() {
        None
    } else {
        Some(anchors)
    }
}

/// Inner text of the prosody element, XML-unescaped.
pub fn parse_inner_text(ssml: &str) -> Option<String> {
    let open_end = ssml.find("<prosody")? + ssml[ssml.find("<prosody")?..].find('>')? + 1;
    let close = ssml.find("</prosody>")?;
    let raw = &ssml[open_end..close];
    Some(
        raw.replace("&lt;", "<")
            .replace("&gt;", ">")
            .replace("&quot;", "\"")
            .replace("&apos;", "'")
            .replace("&amp;", "&"),
    )
}

/// Minimal XML well-formedness check: matched, properly nested tags and
/// quoted attribute values. Good enough to validate our own output.
pub fn is_well_formed_xml(doc: &str) -> bool {
    let mut stack: Vec<String> = Vec::new();
    let bytes = doc.as_bytes();
    let mut i = 0;
    let mut saw_root = false;
    while i < bytes.len() {
        if bytes[i] == b'<' {
            let Some(rel_end) = doc[i..].find('>') else { return false };
            let tag = &doc[i + 1..i + rel_end];
            if tag.is_empty() || tag.contains('<') {
                return false;
            }
            if let Some(name) = tag.strip_prefix('/') {
                match stack.pop() {
                    Some(open) if open == name.trim() => {}
                    _ => return false,
                }
            } else if !tag.ends_with('/') && !tag.starts_with('?') && !tag.starts_with('!') {
                // attribute quotes must balance
                if tag.bytes().filter(|b| *b == b'"').count() % 2 != 0 {
                    return false;
                }
                let name = tag.split_whitespace().next().unwrap_or("");
                if name.is_empty() {
                    return false;
                }
                if stack.is_empty() && saw_root {
                    return false; // second root element
                }
                saw_root = true;
                stack.push(name.to_string());
            }
            i += rel_end + 1;
        } else {
            if stack.is_empty() && !bytes[i].is_ascii_whitespace() {
                return false; // text outside the root
            }
            i += 1;
        }
    }
    stack.is_empty() && saw_root
}

#[cfg(test)]
mod tests {
    use super::*;

    fn voice() -> VoiceSpec {
        VoiceSpec::new("stub", "v01")
    }

    #[test]
    fn rising_document_has_increasing_anchors() {
        let doc = render_ssml("my intonation goes ever upward", ContourLabel::Rising, &voice())
            .unwrap();
        assert!(is_well_formed_xml(&doc), "not well formed: {doc}");
        let anchors = parse_contour_anchors(&doc).unwrap();
        assert!(anchors.windows(2).all(|w| w[1].1 > w[0].1), "{anchors:?}");
    }

    #[test]
    fn falling_document_has_decreasing_anchors() {
        let doc =
            render_ssml("this voice drifts downward", ContourLabel::Falling, &voice()).unwrap();
        assert!(is_well_formed_xml(&doc));
        let anchors = parse_contour_anchors(&doc).unwrap();
        assert!(anchors.windows(2).all(|w| w[1].1 < w[0].1), "{anchors:?}");
    }

    #[test]
    fn empty_text_and_indeterminate_contour_are_invalid() {
        assert!(render_ssml("", ContourLabel::Rising, &voice()).is_err());
        assert!(render_ssml("   ", ContourLabel::Rising, &voice()).is_err());
        assert!(render_ssml("words", ContourLabel::Indeterminate, &voice()).is_err());
    }

    #[test]
    fn punctuated_text_is_rejected() {
        assert!(render_ssml("hello, world", ContourLabel::Rising, &voice()).is_err());
    }

    #[test]
    fn inner_text_round_trips() {
        let doc = render_ssml("tone climbs higher and higher", ContourLabel::Rising, &voice())
            .unwrap();
        assert_eq!(parse_inner_text(&doc).unwrap(), "tone climbs higher and higher");
    }

    #[test]
    fn well_formedness_checker_catches_breaks() {
        assert!(is_well_formed_xml("<a><b>x</b></a>"));
        assert!(!is_well_formed_xml("<a><b>x</a></b>"));
        assert!(!is_well_formed_xml("<a>x"));
        assert!(!is_well_formed_xml("<a attr=\"unbalanced>x</a>"));
    }
}
