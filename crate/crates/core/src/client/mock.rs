use serde::{Deserialize, Serialize};

use crate::corpus::{Gender, Stereotype, WinoMtInstance};
use crate::error::{Error, Result};
use crate::lexicon::GenderLexicon;

/// How the mock picks the profession's inflection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MockRule {
    /// Inflects toward the occupational stereotype: the gold gender on
    /// pro-stereotypical instances, the opposite one on anti-stereotypical
    /// instances, masculine when untagged.
    StereotypeFollower,
    /// Inflects per the pronoun, i.e. the gold gender; neutral referents get
    /// the lexicon's neutral form when it has one, otherwise the source is
    /// echoed untranslated.
    PronounFollower,
    /// Always masculine.
    MaleDefault,
}

impl MockRule {
    pub fn name(self) -> &'static str {
        match self {
            MockRule::StereotypeFollower => "stereotype-follower",
            MockRule::PronounFollower => "pronoun-follower",
            MockRule::MaleDefault => "male-default",
        }
    }
}

impl std::str::FromStr for MockRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stereotype-follower" => Ok(MockRule::StereotypeFollower),
            "pronoun-follower" => Ok(MockRule::PronounFollower),
            "male-default" => Ok(MockRule::MaleDefault),
            other => Err(Error::Config(format!("unknown mock rule {other:?}"))),
        }
    }
}

enum Inflection {
    Masculine,
    Feminine,
    Neutral,
}

/// Deterministic translator producing `<determiner> <profession form> <filler>`.
#[derive(Debug, Clone)]
pub struct MockTranslator {
    rule: MockRule,
    lexicon: GenderLexicon,
}

impl MockTranslator {
    pub fn new(rule: MockRule, lexicon: GenderLexicon) -> Self {
        Self { rule, lexicon }
    }

    pub fn rule(&self) -> MockRule {
        self.rule
    }

    pub fn translate(&self, instance: &WinoMtInstance) -> Result<String> {
        let entry = self
            .lexicon
            .get(&instance.target_profession)
            .ok_or_else(|| {
                Error::Backend(format!(
                    "mock: profession {:?} not in lexicon",
                    instance.target_profession
                ))
            })?;
        let inflection = match (self.rule, instance.gold_gender, instance.stereotype) {
            (MockRule::MaleDefault, _, _) => Inflection::Masculine,
            (MockRule::StereotypeFollower, Gender::Neutral, _)
            | (MockRule::StereotypeFollower, _, Stereotype::None) => Inflection::Masculine,
            (MockRule::StereotypeFollower, gold, Stereotype::Pro) => gendered(gold),
            (MockRule::StereotypeFollower, gold, Stereotype::Anti) => gendered(opposite(gold)),
            (MockRule::PronounFollower, Gender::Neutral, _) => Inflection::Neutral,
            (MockRule::PronounFollower, gold, _) => gendered(gold),
        };
        let lang = self.lexicon.language.to_ascii_lowercase();
        let (determiner, form) = match inflection {
            Inflection::Masculine => (masculine_determiner(&lang), &entry.masculine),
            Inflection::Feminine => (feminine_determiner(&lang), &entry.feminine),
            Inflection::Neutral => match &entry.neutral {
                Some(form) => (None, form),
                None => return Ok(instance.source_text.clone()),
            },
        };
        let mut out: Vec<String> = Vec::new();
        if let Some(d) = determiner {
            out.push(d.to_string());
        }
        out.extend(form.iter().cloned());
        out.push(filler(&lang).to_string());
        Ok(out.join(" "))
    }
}

fn gendered(g: Gender) -> Inflection {
    match g {
        Gender::Female => Inflection::Feminine,
        _ => Inflection::Masculine,
    }
}

fn opposite(g: Gender) -> Gender {
    match g {
        Gender::Male => Gender::Female,
        Gender::Female => Gender::Male,
        Gender::Neutral => Gender::Neutral,
    }
}

fn masculine_determiner(lang: &str) -> Option<&'static str> {
    match lang {
        "es" => Some("El"),
        "de" => Some("Der"),
        _ => None,
    }
}

fn feminine_determiner(lang: &str) -> Option<&'static str> {
    match lang {
        "es" => Some("La"),
        "de" => Some("Die"),
        _ => None,
    }
}

fn filler(lang: &str) -> &'static str {
    match lang {
        "es" => "llegó temprano.",
        "de" => "kam früh an.",
        _ => "arrived early.",
    }
}
