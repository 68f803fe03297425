use super::exec::{name_matches, render_entry, QueryResult, DEFAULT_SNIPPET_LINES};
use crate::diagnostics::{parse_message, Diagnostic, OwnerKind};
use crate::index::{module_name, EntryId, ProjectDatabase};

/// Codes answered straight from the structural tables.
pub const HARDCODED_CODES: [&str; 5] = ["E0001", "E0602", "E1101", "E0213", "E0102"];

fn finish(db: &ProjectDatabase, mut tuples: Vec<Vec<EntryId>>) -> QueryResult {
    tuples.sort();
    tuples.dedup();
    let rendered = tuples
        .iter()
        .map(|t| render_entry(db, *t.last().expect("non-empty row"), true, DEFAULT_SNIPPET_LINES))
        .collect();
    QueryResult { tuples, rendered }
}

fn all_rows(db: &ProjectDatabase) -> impl Iterator<Item = Vec<EntryId>> + '_ {
    let t = db.tables();
    t.m.iter()
        .map(|&m| vec![m])
        .chain(t.m_c.iter().map(|&(m, c)| vec![m, c]))
        .chain(t.m_c_cf.iter().map(|&(m, c, f)| vec![m, c, f]))
        .chain(t.m_c_v.iter().map(|&(m, c, v)| vec![m, c, v]))
        .chain(t.m_gf.iter().map(|&(m, f)| vec![m, f]))
        .chain(t.m_gv.iter().map(|&(m, v)| vec![m, v]))
}

/// Table lookup for the five frequent codes; `None` for any other code or
/// when the message does not name the symbol the lookup needs.
pub fn hardcoded_query_for(diag: &Diagnostic, db: &ProjectDatabase) -> Option<QueryResult> {
    let named = |id: EntryId, lit: &str| db.entry(id).is_some_and(|e| name_matches(e, lit));
    match diag.code.as_str() {
        "E0602" => {
            let symbol = diag.symbol.as_deref()?;
            let rows = all_rows(db).filter(|r| named(*r.last().unwrap(), symbol)).collect();
            Some(finish(db, rows))
        }
        "E1101" => {
            let (kind, owner) = parse_message(&diag.code, &diag.message).owner?;
            let t = db.tables();
            let rows = match kind {
                OwnerKind::Instance | OwnerKind::Class => t
                    .m_c_cf
                    .iter()
                    .chain(&t.m_c_v)
                    .filter(|(_, c, _)| named(*c, &owner))
                    .map(|&(m, c, x)| vec![m, c, x])
                    .collect(),
                OwnerKind::Module => t
                    .m_gf
                    .iter()
                    .chain(&t.m_gv)
                    .filter(|(m, _)| named(*m, &owner))
                    .map(|&(m, x)| vec![m, x])
                    .collect(),
            };
            Some(finish(db, rows))
        }
        "E0102" => {
            let symbol = diag.symbol.as_deref()?;
            let simple = symbol.rsplit('.').next().unwrap_or(symbol);
            let same_file: Vec<EntryId> = db
                .by_name(simple)
                .iter()
                .copied()
                .filter(|&id| db.entry(id).is_some_and(|e| e.file == diag.file))
                .collect();
            let at_line = same_file
                .iter()
                .filter_map(|&id| db.entry(id))
                .filter(|e| e.span.contains_line(diag.line))
                .min_by_key(|e| e.span.len())
                .map(|e| e.qualified_name.clone());
            let qualified = at_line.or_else(|| {
                symbol
                    .contains('.')
                    .then(|| format!("{}.{}", module_name(&diag.file), symbol))
            });
            let rows = same_file
                .into_iter()
                .filter(|&id| {
                    qualified
                        .as_deref()
                        .map_or(true, |q| db.entry(id).is_some_and(|e| e.qualified_name == q))
                })
                .map(|id| vec![id])
                .collect();
            Some(finish(db, rows))
        }
        "E0213" | "E0001" => {
            let rows = db.enclosing_entry(&diag.file, diag.line).map(|id| vec![id]).into_iter().collect();
            Some(finish(db, rows))
        }
        _ => None,
    }
}
