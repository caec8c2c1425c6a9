use crate::corpus::SentencePair;

use super::{CleanerError, CleanerVerdict};

/// Bumped whenever the instruction text changes so cached responses are
/// not reused across template revisions.
pub const TEMPLATE_VERSION: &str = "cleaner-v1";

const FEW_SHOT_SLOT: &str = "[Few-shot prompt]";
const BATCH_SLOT: &str = "[Batch-prompt]";

/// Instruction text with its two slots. Trailing spaces are part of the
/// canonical layout.
pub const CLEANER_TEMPLATE: &str = "You are an expert in aligning and cleaning parallel sentences in different \n\
languages. You will receive two sentences: one in a source language and \n\
one in a target language.\n\
\n\
Your task is:\n\
1. On the first line, respond with \"True\" if the sentences have the same \n\
meaning, otherwise respond with \"False\".\n\
2. If the first line is \"True\", provide the cleaned and aligned sentences\n\
on the second and third lines respectively by fixing syntax errors, removing \n\
noise (such as unnecessary phrases, punctuation or ambiguous \n\
numbers), and normalizing text (e.g., capitalization).\n\
\n\
Here are some examples to guide you:\n\
[Few-shot prompt]\n\
\n\
Now, clean the following sentence pairs:\n\
[Batch-prompt]";

/// A worked example: an input pair and the answer block it should produce.
#[derive(Clone, Debug, PartialEq)]
pub struct FewShot {
    pub src_name: String,
    pub src_text: String,
    pub tgt_name: String,
    pub tgt_text: String,
    pub verdict: CleanerVerdict,
}

/// The two Indonesian/Balinese examples shipped with the instructions: a
/// misaligned pair and a noisy aligned pair with its cleaned form.
pub fn default_few_shots() -> Vec<FewShot> {
    vec![
        FewShot {
            src_name: "Indonesian".into(),
            src_text: "Dengan harga yang bisa dibilang menengah, apa saja yang ditwarkannya?".into(),
            tgt_name: "Balinese".into(),
            tgt_text: "Suratan puniki nénten indik Kabupatén miwah kota ring Kepulauan Riau.".into(),
            verdict: CleanerVerdict::misaligned(),
        },
        FewShot {
            src_name: "Indonesian".into(),
            src_text: "Bahasa daerah memiliki karakteristik yang unik.".into(),
            tgt_name: "Balinese".into(),
            tgt_text: "(32:2) Basa daerah madue \"karakteristik\" sane soleh.".into(),
            verdict: CleanerVerdict::aligned(
                "Bahasa daerah memiliki karakteristik yang unik.",
                "Basa daerah madue karakteristik sane soleh.",
            ),
        },
    ]
}

fn one_line(text: &str) -> String {
    text.split(['\r', '\n'])
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

fn pair_block(src_name: &str, src_text: &str, tgt_name: &str, tgt_text: &str) -> String {
    format!("{src_name}: {}\n{tgt_name}: {}", one_line(src_text), one_line(tgt_text))
}

/// One answer block: `False`, or `True` followed by the two cleaned lines.
pub fn answer_block(verdict: &CleanerVerdict, src_name: &str, tgt_name: &str) -> String {
    match (&verdict.cleaned_src, &verdict.cleaned_tgt) {
        (Some(src), Some(tgt)) if verdict.aligned => {
            format!("True\n{}", pair_block(src_name, src, tgt_name, tgt))
        }
        _ => "False".to_string(),
    }
}

/// All example pairs, then all example answers, blank-line separated.
pub fn render_few_shots(few_shots: &[FewShot]) -> String {
    let pairs: Vec<String> = few_shots
        .iter()
        .map(|f| pair_block(&f.src_name, &f.src_text, &f.tgt_name, &f.tgt_text))
        .collect();
    let answers: Vec<String> = few_shots
        .iter()
        .map(|f| answer_block(&f.verdict, &f.src_name, &f.tgt_name))
        .collect();
    if pairs.is_empty() {
        return String::new();
    }
    format!("{}\n\n{}", pairs.join("\n\n"), answers.join("\n\n"))
}

pub fn render_batch(batch: &[SentencePair]) -> String {
    batch
        .iter()
        .map(|p| {
            pair_block(
                p.src.lang.display_name(),
                &p.src.text,
                p.tgt.lang.display_name(),
                &p.tgt.text,
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Fills the instruction template. Line breaks inside sentence texts are
/// flattened to spaces so every pair occupies exactly two lines.
pub fn render_cleaner_prompt(batch: &[SentencePair], few_shots: &[FewShot]) -> Result<String, CleanerError> {
    if batch.is_empty() {
        return Err(CleanerError::EmptyBatch);
    }
    Ok(CLEANER_TEMPLATE
        .replacen(FEW_SHOT_SLOT, &render_few_shots(few_shots), 1)
        .replacen(BATCH_SLOT, &render_batch(batch), 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LanguageRegistry;

    fn pair(src: &str, tgt: &str) -> SentencePair {
        let reg = LanguageRegistry::default();
        SentencePair::new(
            0,
            src,
            reg.get("id").unwrap().clone(),
            tgt,
            reg.get("ban").unwrap().clone(),
            "t",
        )
        .unwrap()
    }

    #[test]
    fn single_pair_block_after_marker() {
        let prompt =
            render_cleaner_prompt(&[pair("Satu dua tiga.", "Siki kalih telu.")], &default_few_shots()).unwrap();
        let (_, tail) = prompt.split_once("Now, clean the following sentence pairs:\n").unwrap();
        assert_eq!(tail, "Indonesian: Satu dua tiga.\nBalinese: Siki kalih telu.");
    }

    #[test]
    fn rendering_is_deterministic() {
        let batch = [pair("a b c", "d e f"), pair("g h", "i j")];
        let a = render_cleaner_prompt(&batch, &default_few_shots()).unwrap();
        let b = render_cleaner_prompt(&batch, &default_few_shots()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_batch_is_an_error() {
        assert!(matches!(
            render_cleaner_prompt(&[], &default_few_shots()),
            Err(CleanerError::EmptyBatch)
        ));
    }

    #[test]
    fn embedded_newlines_are_flattened() {
        let prompt = render_batch(&[pair("one\ntwo", "three\r\nfour")]);
        assert_eq!(prompt, "Indonesian: one two\nBalinese: three four");
    }
}
