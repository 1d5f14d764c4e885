use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Dictionary;
use crate::error::{Error, Result};

/// Multiple-choice question over distinct categories.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub choices: Vec<usize>,
}

/// One human answer: the 0-based position of the voted choice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub question: usize,
    pub choice: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteDataset {
    questions: Vec<Question>,
    answers: Vec<Answer>,
}

impl VoteDataset {
    pub fn new(questions: Vec<Question>, answers: Vec<Answer>) -> Result<Self> {
        for q in &questions {
            if q.choices.len() < 2 {
                return Err(Error::InvalidArgument(format!("question {} has fewer than 2 choices", q.id)));
            }
            let mut sorted = q.choices.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidArgument(format!("question {} repeats a choice", q.id)));
            }
        }
        for a in &answers {
            let q = questions
                .get(a.question)
                .ok_or_else(|| Error::InvalidArgument(format!("answer refers to question #{}", a.question)))?;
            if a.choice >= q.choices.len() {
                return Err(Error::InvalidArgument(format!(
                    "answer to question {} votes position {} of {}",
                    q.id,
                    a.choice + 1,
                    q.choices.len()
                )));
            }
        }
        Ok(Self { questions, answers })
    }

    pub fn questions(&self) -> &[Question] {
        &self.questions
    }

    pub fn answers(&self) -> &[Answer] {
        &self.answers
    }

    pub fn n_answers(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }

    pub fn question_of(&self, a: &Answer) -> &Question {
        &self.questions[a.question]
    }

    pub fn voted_category(&self, a: &Answer) -> usize {
        self.questions[a.question].choices[a.choice]
    }

    /// Distinct categories appearing in any question, ascending.
    pub fn categories(&self) -> Vec<usize> {
        let mut cats: Vec<usize> = self.questions.iter().flat_map(|q| q.choices.iter().copied()).collect();
        cats.sort_unstable();
        cats.dedup();
        cats
    }

    /// Writes one CSV row per answer with a 1-based voted index.
    pub fn write_csv(&self, path: &Path, categories: &Dictionary) -> Result<()> {
        let m = self.questions.iter().map(|q| q.choices.len()).max().unwrap_or(2);
        let mut w = csv::WriterBuilder::new().flexible(true).from_path(path)?;
        let mut header = vec!["question_id".to_string()];
        header.extend((1..=m).map(|i| format!("choice_{i}")));
        header.push("voted_index".into());
        w.write_record(&header)?;
        for a in &self.answers {
            let q = &self.questions[a.question];
            let mut rec = vec![q.id.clone()];
            rec.extend(q.choices.iter().map(|&c| categories.name(c).to_owned()));
            rec.push((a.choice + 1).to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Reads `question_id,choice_1,...,choice_m,voted_index` rows (with header).
/// Every choice must name a category in `categories`.
pub fn load_votes(path: &Path, categories: &Dictionary) -> Result<VoteDataset> {
    read_votes(path, |name| categories.get(name))
}

/// Like [`load_votes`] but interns unseen category names into `categories`.
pub fn load_votes_interning(path: &Path, categories: &mut Dictionary) -> Result<VoteDataset> {
    read_votes(path, |name| Some(categories.intern(name)))
}

fn read_votes(path: &Path, mut resolve: impl FnMut(&str) -> Option<usize>) -> Result<VoteDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut questions: Vec<Question> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    let mut answers = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        // Header is line 1.
        let line = rec.position().map_or(row + 2, |p| p.line() as usize);
        let err = |m: String| Error::parse(path, line, m);
        if rec.len() < 4 {
            return Err(err(format!("expected at least 2 choices, got {} fields", rec.len())));
        }
        let m = rec.len() - 2;
        let voted: usize = rec[rec.len() - 1]
            .parse()
            .map_err(|_| err(format!("bad voted index {:?}", &rec[rec.len() - 1])))?;
        if voted < 1 || voted > m {
            return Err(err(format!("voted index {voted} outside 1..={m}")));
        }
        let mut choices = Vec::with_capacity(m);
        for name in rec.iter().skip(1).take(m) {
            let c = resolve(name).ok_or_else(|| err(format!("unknown category {name:?}")))?;
            if choices.contains(&c) {
                return Err(err(format!("category {name:?} repeated within a question")));
            }
            choices.push(c);
        }
        let id = rec[0].to_owned();
        let qi = match by_id.get(&id) {
            Some(&qi) => {
                if questions[qi].choices != choices {
                    return Err(err(format!("question {id} reappears with different choices")));
                }
                qi
            }
            None => {
                by_id.insert(id.clone(), questions.len());
                questions.push(Question { id, choices });
                questions.len() - 1
            }
        };
        answers.push(Answer {
            question: qi,
            choice: voted - 1,
        });
    }
    if answers.is_empty() {
        return Err(Error::Empty(format!("{} has no answers", path.display())));
    }
    VoteDataset::new(questions, answers)
}
