//! Offline stand-ins for every provider kind. Each output is a pure function of
//! the inputs and the configured seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::ProviderError;

pub const DEFAULT_EMBED_DIM: usize = 256;

fn digest(seed: u64, parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().into()
}

fn rng_from(d: &[u8; 32]) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(*d)
}

/// Keeps a prompt-dependent fraction of the input words, chosen by an RNG
/// seeded from the (seed, system, user) digest.
pub fn chat(seed: u64, system: &str, user: &str) -> String {
    let prompt_digest = digest(seed, &[system.as_bytes()]);
    let keep = 0.3 + 0.5 * (prompt_digest[0] as f64 / 255.0);
    let mut rng = rng_from(&digest(seed, &[system.as_bytes(), user.as_bytes()]));
    let words: Vec<&str> = user.split_whitespace().collect();
    let kept: Vec<&str> = words.iter().copied().filter(|_| rng.gen_bool(keep)).collect();
    if kept.is_empty() {
        words.first().copied().unwrap_or("…").to_string()
    } else {
        kept.join(" ")
    }
}

/// Split on sentence-final punctuation followed by whitespace.
pub fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let bytes: Vec<(usize, char)> = text.char_indices().collect();
    for (i, &(pos, c)) in bytes.iter().enumerate() {
        if matches!(c, '.' | '!' | '?') {
            let next_is_space = bytes.get(i + 1).map(|(_, n)| n.is_whitespace()).unwrap_or(true);
            if next_is_space {
                let end = pos + c.len_utf8();
                let s = text[start..end].trim();
                if !s.is_empty() {
                    out.push(s);
                }
                start = end;
            }
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

/// Tags each sentence with a `[src→tgt]` marker.
pub fn translate(text: &str, source: &str, target: &str) -> String {
    sentences(text)
        .into_iter()
        .map(|s| format!("[{source}→{target}] {s}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// L2-normalised counts of hashed character trigrams of the lowercased text.
/// Texts shorter than three characters hash as a single gram.
pub fn embed(seed: u64, text: &str, dim: usize) -> Vec<f64> {
    let chars: Vec<char> = text.to_lowercase().chars().collect();
    let mut v = vec![0.0; dim];
    let mut add = |gram: &[char]| {
        let s: String = gram.iter().collect();
        v[(fnv1a(seed, s.as_bytes()) % dim as u64) as usize] += 1.0;
    };
    if chars.len() < 3 {
        add(&chars);
    } else {
        for w in chars.windows(3) {
            add(w);
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// 1×1 RGB PNG whose pixel is the first three bytes of the prompt digest.
pub fn text_to_image(seed: u64, prompt: &str) -> Vec<u8> {
    let d = digest(seed, &[prompt.as_bytes()]);
    encode_rgb_png(1, 1, &d[..3])
}

pub fn encode_rgb_png(width: u32, height: u32, rgb: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width, height);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().expect("in-memory PNG header");
        w.write_image_data(rgb).expect("in-memory PNG data");
    }
    out
}

/// Decode a PNG and return (width, height, first pixel RGB).
pub fn inspect_png(bytes: &[u8]) -> Result<(u32, u32, [u8; 3]), ProviderError> {
    let bad = |e: String| ProviderError::Input(format!("image is not a valid PNG: {e}"));
    let decoder = png::Decoder::new(bytes);
    let mut reader = decoder.read_info().map_err(|e| bad(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| bad(e.to_string()))?;
    let px = match info.color_type {
        png::ColorType::Rgb | png::ColorType::Rgba if buf.len() >= 3 => [buf[0], buf[1], buf[2]],
        png::ColorType::Grayscale | png::ColorType::GrayscaleAlpha if !buf.is_empty() => [buf[0]; 3],
        _ => [0, 0, 0],
    };
    Ok((info.width, info.height, px))
}

/// Caption naming the image digest and its first pixel colour.
pub fn image_to_text(seed: u64, image: &[u8], prompt: &str) -> Result<String, ProviderError> {
    let (w, h, [r, g, b]) = inspect_png(image)?;
    let image_digest = hex::encode(Sha256::digest(image));
    let d = digest(seed, &[image, prompt.as_bytes()]);
    const SUBJECTS: [&str; 6] = ["a child", "a small dog", "a woman", "a kitchen", "a quiet street", "a wooden wardrobe"];
    let subject = SUBJECTS[d[0] as usize % SUBJECTS.len()];
    Ok(format!(
        "The {w}x{h} image {} shows {subject} in a scene dominated by the colour #{r:02x}{g:02x}{b:02x}.",
        &image_digest[..16]
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn chat_is_deterministic_and_prompt_sensitive() {
        let a = chat(0, "sys one", "the boy saw a small puppy on the street");
        assert_eq!(a, chat(0, "sys one", "the boy saw a small puppy on the street"));
        assert!(!a.is_empty());
        assert_ne!(chat(0, "sys one", "x y z w v u t s r q"), chat(1, "sys one", "x y z w v u t s r q"));
    }

    #[test]
    fn translate_tags_sentences() {
        assert_eq!(
            translate("O menino viu. Ele gostou! Fim", "pt", "en"),
            "[pt→en] O menino viu. [pt→en] Ele gostou! [pt→en] Fim"
        );
        assert_eq!(sentences("3.5 litres. ok"), vec!["3.5 litres.", "ok"]);
    }

    #[test]
    fn embed_properties() {
        let a = embed(0, "the boy hid the puppy", 256);
        assert_eq!(a, embed(0, "the boy hid the puppy", 256));
        assert!((cos(&a, &a) - 1.0).abs() < 1e-12);
        // Disjoint character sets share no trigram; only hash collisions overlap.
        let b = embed(0, "xyzq wvkj", 256);
        let c = embed(0, "abcd efgh", 256);
        assert!(cos(&b, &c) < 0.2, "cos = {}", cos(&b, &c));
        assert_eq!(embed(0, "ab", 16).iter().filter(|x| **x > 0.0).count(), 1);
    }

    #[test]
    fn image_round_trip() {
        let png = text_to_image(0, "a storyboard");
        let d = digest(0, &[b"a storyboard"]);
        let (w, h, px) = inspect_png(&png).unwrap();
        assert_eq!((w, h), (1, 1));
        assert_eq!(px, [d[0], d[1], d[2]]);
        let caption = image_to_text(0, &png, "Describe").unwrap();
        assert!(caption.contains(&hex::encode(Sha256::digest(&png))[..16]));
        assert!(image_to_text(0, b"GIF89a not a png", "Describe").is_err());
    }
}
