use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tokenize::{tokenize, SEP_TOKEN};
use super::vocab::{Vocab, PAD};
use crate::error::{Error, Result};

/// One labeled (or unlabeled) text.
#[derive(Debug, Clone, PartialEq)]
pub struct Post {
    pub id: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub label: Option<usize>,
    pub user: Option<String>,
}

impl Post {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Option<usize>, user: Option<String>) -> Self {
        let text = text.into();
        Post {
            id: id.into(),
            tokens: tokenize(&text),
            text,
            label,
            user,
        }
    }
}

/// All posts of one user, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct UserRecord {
    pub user: String,
    pub posts: Vec<Post>,
    pub label: usize,
}

/// Fixed-length id sequence with its padding mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncodedDoc {
    pub ids: Vec<usize>,
    pub mask: Vec<bool>,
    pub label: Option<usize>,
}

impl EncodedDoc {
    /// Number of real (unpadded) positions.
    pub fn len(&self) -> usize {
        self.mask.iter().take_while(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn max_len(&self) -> usize {
        self.ids.len()
    }
}

/// First `max_len` ids of `tokens`, right-padded with [`PAD`].
pub fn encode(tokens: &[String], vocab: &Vocab, max_len: usize) -> EncodedDoc {
    let mut ids: Vec<usize> = tokens.iter().take(max_len).map(|t| vocab.id(t)).collect();
    let n = ids.len();
    ids.resize(max_len, PAD);
    let mask = (0..max_len).map(|i| i < n).collect();
    EncodedDoc { ids, mask, label: None }
}

/// Token stream of a user: posts in order, separated by `<sep>`.
pub fn user_tokens(record: &UserRecord) -> Vec<String> {
    let mut out = Vec::new();
    for (i, p) in record.posts.iter().enumerate() {
        if i > 0 {
            out.push(SEP_TOKEN.to_string());
        }
        out.extend(p.tokens.iter().cloned());
    }
    out
}

/// User-level document. Long histories keep their earliest tokens.
pub fn concat_user(record: &UserRecord, vocab: &Vocab, max_len: usize) -> EncodedDoc {
    let mut doc = encode(&user_tokens(record), vocab, max_len);
    doc.label = Some(record.label);
    doc
}

/// Groups posts by user id, preserving first-appearance order of users and file order of posts.
pub fn group_users(posts: &[Post]) -> Result<Vec<UserRecord>> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: std::collections::HashMap<String, Vec<Post>> = Default::default();
    for p in posts {
        let user = p
            .user
            .clone()
            .ok_or_else(|| Error::Data(format!("post `{}` has no user id", p.id)))?;
        if !groups.contains_key(&user) {
            order.push(user.clone());
        }
        groups.entry(user).or_default().push(p.clone());
    }
    order
        .into_iter()
        .map(|user| {
            let posts = groups.remove(&user).unwrap_or_default();
            let mut label = None;
            for p in &posts {
                match (label, p.label) {
                    (None, l) => label = l,
                    (Some(a), Some(b)) if a != b => {
                        return Err(Error::Data(format!("user `{user}` has conflicting labels")));
                    }
                    _ => {}
                }
            }
            let label = label.ok_or_else(|| Error::Data(format!("user `{user}` has no labeled post")))?;
            Ok(UserRecord { user, posts, label })
        })
        .collect()
}

/// Wire form of one dataset line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostRecord {
    pub id: String,
    #[serde(default)]
    pub user: Option<String>,
    pub text: String,
    #[serde(default)]
    pub label: Option<String>,
}

/// Reads a JSON-lines dataset. Label strings are mapped through `labels`; blank lines are skipped.
pub fn load_jsonl(path: &Path, labels: &[String]) -> Result<Vec<Post>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut posts = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            msg,
        };
        let rec: PostRecord = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let label = match &rec.label {
            None => None,
            Some(l) => Some(
                labels
                    .iter()
                    .position(|x| x == l)
                    .ok_or_else(|| parse_err(format!("label `{l}` not in label list {labels:?}")))?,
            ),
        };
        posts.push(Post::new(rec.id, rec.text, label, rec.user));
    }
    Ok(posts)
}

pub fn write_jsonl(path: &Path, posts: &[Post], labels: &[String]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for p in posts {
        let rec = PostRecord {
            id: p.id.clone(),
            user: p.user.clone(),
            text: p.text.clone(),
            label: p.label.map(|l| labels[l].clone()),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::vocab::UNK;

    fn vocab_of(tokens: &[&str]) -> Vocab {
        let d = vec![tokens.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
        Vocab::build(&d, 1).unwrap()
    }

    fn strs(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn padding_and_truncation() {
        let v = vocab_of(&["a", "b", "c", "d", "e"]);
        let d = encode(&strs(&["a"]), &v, 3);
        assert_eq!(d.ids, [v.id("a"), 0, 0]);
        assert_eq!(d.mask, [true, false, false]);
        let d = encode(&strs(&["a", "b", "c", "d", "e"]), &v, 3);
        assert_eq!(d.ids, [v.id("a"), v.id("b"), v.id("c")]);
        assert_eq!(d.len(), 3);
        let d = encode(&strs(&["zzz"]), &v, 2);
        assert_eq!(d.ids, [UNK, 0]);
    }

    #[test]
    fn user_concatenation() {
        let v = vocab_of(&["a", "b", "c", "d", SEP_TOKEN]);
        let p1 = Post::new("1", "a b", Some(0), Some("u".into()));
        let p2 = Post::new("2", "c d", Some(0), Some("u".into()));
        let single = UserRecord {
            user: "u".into(),
            posts: vec![p1.clone()],
            label: 0,
        };
        assert_eq!(concat_user(&single, &v, 8).ids, encode(&p1.tokens, &v, 8).ids);

        let both = UserRecord {
            user: "u".into(),
            posts: vec![p1, p2],
            label: 0,
        };
        let d = concat_user(&both, &v, 8);
        let expect: Vec<usize> = ["a", "b", SEP_TOKEN, "c", "d"].iter().map(|t| v.id(t)).chain([0, 0, 0]).collect();
        assert_eq!(d.ids, expect);
        assert_eq!(concat_user(&both, &v, 4).ids, expect[..4]);
    }

    #[test]
    fn grouping_keeps_order_and_rejects_conflicts() {
        let posts = vec![
            Post::new("1", "x", Some(1), Some("bob".into())),
            Post::new("2", "y", Some(0), Some("amy".into())),
            Post::new("3", "z", None, Some("bob".into())),
        ];
        let users = group_users(&posts).unwrap();
        assert_eq!(users[0].user, "bob");
        assert_eq!(users[0].posts.iter().map(|p| p.id.as_str()).collect::<Vec<_>>(), ["1", "3"]);
        assert_eq!(users[0].label, 1);

        let bad = vec![
            Post::new("1", "x", Some(1), Some("bob".into())),
            Post::new("2", "y", Some(0), Some("bob".into())),
        ];
        assert!(group_users(&bad).is_err());
    }

    #[test]
    fn jsonl_round_trip_and_label_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let labels = strs(&["-1", "0", "1"]);
        let posts = vec![
            Post::new("a", "Hello there!", Some(2), Some("u1".into())),
            Post::new("b", "no label", None, None),
        ];
        write_jsonl(&path, &posts, &labels).unwrap();
        assert_eq!(load_jsonl(&path, &labels).unwrap(), posts);

        std::fs::write(&path, "{\"id\":\"x\",\"text\":\"t\",\"label\":\"7\"}\n").unwrap();
        let err = load_jsonl(&path, &labels).unwrap_err().to_string();
        assert!(err.contains(":1:") && err.contains("label `7`"), "{err}");
    }
}
