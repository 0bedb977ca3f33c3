//! Line-oriented chat on arbitrary reader/writer pairs (stdin/stdout in the
//! CLI). Each non-empty input line is one patient turn; the session ends
//! when the consultation closes or the input runs out.

use std::io::{self, BufRead, Write};

use medconsult_core::crm::{ConsultationPhase, SessionId};
use medconsult_core::dialogue::{Consultation, DialogueError, Engine, Generator, Speaker, Utterance};
use medconsult_core::kg::KnowledgeGraph;

#[derive(Debug, thiserror::Error)]
pub enum ChatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Dialogue(#[from] DialogueError),
}

/// Renders one utterance the way the terminal shows it; drug images are
/// printed as their locators.
pub fn render_utterance(kg: &KnowledgeGraph, u: &Utterance) -> String {
    let who = match u.speaker {
        Speaker::Patient => "patient",
        Speaker::System => "doctor",
    };
    let mut line = format!("{who}> {}", u.text);
    for a in &u.attachments {
        line.push_str(&format!("\n  [image] {}: {}", kg.name_of(&a.drug), a.image_uri));
    }
    line
}

pub fn run_chat(
    kg: &KnowledgeGraph,
    engine: &Engine,
    session_id: SessionId,
    input: impl BufRead,
    mut output: impl Write,
    generator: Option<&dyn Generator>,
    echo_patient: bool,
) -> Result<Consultation, ChatError> {
    let mut consultation = Consultation::new(kg, session_id);
    for line in input.lines() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let outcome = engine.step(kg, &mut consultation, text, generator)?;
        if echo_patient {
            let patient = &consultation.transcript[consultation.transcript.len() - 2];
            writeln!(output, "{}", render_utterance(kg, patient))?;
        }
        writeln!(output, "{}", render_utterance(kg, &outcome.reply))?;
        output.flush()?;
        if outcome.phase == ConsultationPhase::Closed {
            break;
        }
    }
    Ok(consultation)
}
