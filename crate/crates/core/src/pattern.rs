use crate::error::{Error, Result};
use crate::model::{ChunkSpec, PatternKey, TaskId};

/// Chunk pattern of a sentence under the attribute set of `task`.
///
/// Two sentences get the same key exactly when their chunk sequences agree on roles and
/// on every attribute the task cares about; lexical material never enters the key.
pub fn pattern_of(chunks: &[ChunkSpec], task: TaskId) -> Result<PatternKey> {
    let mut tokens = Vec::with_capacity(chunks.len());
    for c in chunks {
        if !task.roles().contains(&c.role) {
            return Err(Error::UnknownRole {
                role: c.role.as_str().to_string(),
                task: task.as_str().to_string(),
            });
        }
        tokens.push(c.pattern_token(task));
    }
    Ok(PatternKey(tokens.join(" ")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Attribute, ChunkRole, FeatureValue};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn chunk(role: ChunkRole, feats: &[(Attribute, FeatureValue)]) -> ChunkSpec {
        let mut c = ChunkSpec {
            role,
            slot: "x".into(),
            form: "np".into(),
            prefix: None,
            features: feats.iter().copied().collect::<BTreeMap<_, _>>(),
        };
        c.normalize().unwrap();
        c
    }

    #[test]
    fn agreement_key() {
        use Attribute::Number;
        use FeatureValue::*;
        let k = pattern_of(
            &[
                chunk(ChunkRole::SubjectNp, &[(Number, Sg)]),
                chunk(ChunkRole::Pp1, &[(Number, Sg)]),
                chunk(ChunkRole::Vp, &[(Number, Sg)]),
            ],
            TaskId::Agr,
        )
        .unwrap();
        assert_eq!(k.as_str(), "np-sg pp1-sg vp-sg");
    }

    #[test]
    fn alternation_key() {
        let k = pattern_of(
            &[
                chunk(ChunkRole::NpAgent, &[]),
                chunk(ChunkRole::VerbActive, &[]),
                chunk(ChunkRole::NpLoc, &[]),
                chunk(ChunkRole::PpTheme, &[]),
            ],
            TaskId::SprayLoadAltAtl,
        )
        .unwrap();
        assert_eq!(k.as_str(), "np-agent v-act np-loc pp-theme");
    }

    #[test]
    fn role_outside_task_is_rejected() {
        let err = pattern_of(&[chunk(ChunkRole::NpAgent, &[])], TaskId::Agr).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("np-agent") && msg.contains("agr"), "{msg}");
    }

    #[test]
    fn marked_prepositions_and_embedding_show_in_key() {
        let wrong = chunk(ChunkRole::PpLoc, &[(Attribute::PrepClass, FeatureValue::Mismatched)]);
        let emb = chunk(ChunkRole::PpLoc, &[(Attribute::Attachment, FeatureValue::Noun)]);
        let plain = chunk(ChunkRole::PpLoc, &[]);
        let keys: Vec<String> = [wrong, emb, plain]
            .iter()
            .map(|c| pattern_of(std::slice::from_ref(c), TaskId::SprayLoadAltAtl).unwrap().0)
            .collect();
        assert_eq!(keys, ["pp-loc-mismatched", "pp-loc-emb", "pp-loc"]);
    }

    proptest! {
        // Lexical fields never influence the key.
        #[test]
        fn key_ignores_lexical_fields(slot in "[a-z]{1,8}", form in "[a-z]{1,8}", n in 0usize..2) {
            let number = if n == 0 { FeatureValue::Sg } else { FeatureValue::Pl };
            let a = chunk(ChunkRole::SubjectNp, &[(Attribute::Number, number)]);
            let mut b = a.clone();
            b.slot = slot;
            b.form = form;
            b.prefix = Some("coord".into());
            prop_assert_eq!(pattern_of(&[a], TaskId::Agr).unwrap(), pattern_of(&[b], TaskId::Agr).unwrap());
        }
    }
}
