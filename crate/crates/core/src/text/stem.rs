//! Stemmers behind a small named interface. The default is Lovins (1968):
//! longest-match removal from a fixed ending list, each ending guarded by a
//! context condition, followed by undoubling and recoding of the stem end.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub trait Stemmer: Send + Sync {
    fn name(&self) -> &'static str;
    fn stem(&self, token: &str) -> String;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StemmerKind {
    #[default]
    Lovins,
    None,
}

impl StemmerKind {
    pub fn stemmer(self) -> &'static dyn Stemmer {
        match self {
            StemmerKind::Lovins => &Lovins,
            StemmerKind::None => &NoStem,
        }
    }
}

impl FromStr for StemmerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "lovins" => Ok(StemmerKind::Lovins),
            "none" | "identity" => Ok(StemmerKind::None),
            other => Err(Error::InvalidArgument(format!("unknown stemmer {other:?}"))),
        }
    }
}

impl fmt::Display for StemmerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.stemmer().name())
    }
}

pub struct NoStem;

impl Stemmer for NoStem {
    fn name(&self) -> &'static str {
        "none"
    }

    fn stem(&self, token: &str) -> String {
        token.to_owned()
    }
}

pub struct Lovins;

impl Stemmer for Lovins {
    fn name(&self) -> &'static str {
        "lovins"
    }

    fn stem(&self, token: &str) -> String {
        lovins_stem(token)
    }
}

/// Context conditions on the stem that would remain after removing an ending.
/// Every condition also implies a minimum stem length of two.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Cond {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
    I,
    J,
    K,
    L,
    M,
    N,
    O,
    P,
    Q,
    R,
    S,
    T,
    U,
    V,
    W,
    X,
    Y,
    Z,
    AA,
    BB,
    CC,
}

impl Cond {
    fn holds(self, stem: &[u8]) -> bool {
        let len = stem.len();
        if len < 2 {
            return false;
        }
        let last = stem[len - 1];
        let ends = |s: &[u8]| stem.ends_with(s);
        match self {
            Cond::A => true,
            Cond::B => len >= 3,
            Cond::C => len >= 4,
            Cond::D => len >= 5,
            Cond::E => last != b'e',
            Cond::F => len >= 3 && last != b'e',
            Cond::G => len >= 3 && last == b'f',
            Cond::H => last == b't' || ends(b"ll"),
            Cond::I => last != b'o' && last != b'e',
            Cond::J => last != b'a' && last != b'e',
            Cond::K => {
                len >= 3
                    && (last == b'l' || last == b'i' || (last == b'e' && stem[len - 3] == b'u'))
            }
            Cond::L => last != b'u' && last != b'x' && (last != b's' || ends(b"os")),
            Cond::M => !matches!(last, b'a' | b'c' | b'e' | b'm'),
            // minimum 4 after s**, 3 elsewhere
            Cond::N => len >= 3 && (stem[len - 3] != b's' || len >= 4),
            Cond::O => last == b'l' || last == b'i',
            Cond::P => last != b'c',
            Cond::Q => len >= 3 && last != b'l' && last != b'n',
            Cond::R => last == b'n' || last == b'r',
            Cond::S => ends(b"dr") || (last == b't' && !ends(b"tt")),
            Cond::T => last == b's' || (last == b't' && !ends(b"ot")),
            Cond::U => matches!(last, b'l' | b'm' | b'n' | b'r'),
            Cond::V => last == b'c',
            Cond::W => last != b's' && last != b'u',
            Cond::X => {
                last == b'l' || last == b'i' || (len >= 3 && last == b'e' && stem[len - 3] == b'u')
            }
            Cond::Y => ends(b"in"),
            Cond::Z => last != b'f',
            Cond::AA => {
                matches!(last, b'd' | b'f' | b'l' | b't')
                    || [&b"ph"[..], b"th", b"er", b"or", b"es"]
                        .iter()
                        .any(|s| ends(s))
            }
            Cond::BB => len >= 3 && !ends(b"met") && !ends(b"ryst"),
            Cond::CC => last == b'l',
        }
    }
}

use Cond::*;

/// The 294 endings, grouped by length from 11 down to 1.
static ENDINGS: &[(&str, Cond)] = &[
    ("alistically", B),
    ("arizability", A),
    ("izationally", B),
    ("antialness", A),
    ("arisations", A),
    ("arizations", A),
    ("entialness", A),
    ("allically", C),
    ("antaneous", A),
    ("antiality", A),
    ("arisation", A),
    ("arization", A),
    ("ationally", B),
    ("ativeness", A),
    ("eableness", E),
    ("entations", A),
    ("entiality", A),
    ("entialize", A),
    ("entiation", A),
    ("ionalness", A),
    ("istically", A),
    ("itousness", A),
    ("izability", A),
    ("izational", A),
    ("ableness", A),
    ("arizable", A),
    ("entation", A),
    ("entially", A),
    ("eousness", A),
    ("ibleness", A),
    ("icalness", A),
    ("ionalism", A),
    ("ionality", A),
    ("ionalize", A),
    ("iousness", A),
    ("izations", A),
    ("lessness", A),
    ("ability", A),
    ("aically", A),
    ("alistic", B),
    ("alities", A),
    ("ariness", E),
    ("aristic", A),
    ("arizing", A),
    ("ateness", A),
    ("atingly", A),
    ("ational", B),
    ("atively", A),
    ("ativism", A),
    ("elihood", E),
    ("encible", A),
    ("entally", A),
    ("entials", A),
    ("entiate", A),
    ("entness", A),
    ("fulness", A),
    ("ibility", A),
    ("icalism", A),
    ("icalist", A),
    ("icality", A),
    ("icalize", A),
    ("ication", G),
    ("icianry", A),
    ("ination", A),
    ("ingness", A),
    ("ionally", A),
    ("isation", A),
    ("ishness", A),
    ("istical", A),
    ("iteness", A),
    ("iveness", A),
    ("ivistic", A),
    ("ivities", A),
    ("ization", F),
    ("izement", A),
    ("oidally", A),
    ("ousness", A),
    ("aceous", A),
    ("acious", B),
    ("action", G),
    ("alness", A),
    ("ancial", A),
    ("ancies", A),
    ("ancing", B),
    ("ariser", A),
    ("arized", A),
    ("arizer", A),
    ("atable", A),
    ("ations", B),
    ("atives", A),
    ("eature", Z),
    ("efully", A),
    ("encies", A),
    ("encing", A),
    ("ential", A),
    ("enting", C),
    ("entist", A),
    ("eously", A),
    ("ialist", A),
    ("iality", A),
    ("ialize", A),
    ("ically", A),
    ("icance", A),
    ("icians", A),
    ("icists", A),
    ("ifully", A),
    ("ionals", A),
    ("ionate", D),
    ("ioning", A),
    ("ionist", A),
    ("iously", A),
    ("istics", A),
    ("izable", E),
    ("lessly", A),
    ("nesses", A),
    ("oidism", A),
    ("acies", A),
    ("acity", A),
    ("aging", B),
    ("aical", A),
    ("alist", A),
    ("alism", B),
    ("ality", A),
    ("alize", A),
    ("allic", BB),
    ("anced", B),
    ("ances", B),
    ("antic", C),
    ("arial", A),
    ("aries", A),
    ("arily", A),
    ("arity", B),
    ("arize", A),
    ("aroid", A),
    ("ately", A),
    ("ating", I),
    ("ation", B),
    ("ative", A),
    ("ators", A),
    ("atory", A),
    ("ature", E),
    ("early", Y),
    ("ehood", A),
    ("eless", A),
    ("elity", A),
    ("ement", A),
    ("enced", A),
    ("ences", A),
    ("eness", E),
    ("ening", E),
    ("ental", A),
    ("ented", C),
    ("ently", A),
    ("fully", A),
    ("ially", A),
    ("icant", A),
    ("ician", A),
    ("icide", A),
    ("icism", A),
    ("icist", A),
    ("icity", A),
    ("idine", I),
    ("iedly", A),
    ("ihood", A),
    ("inate", A),
    ("iness", A),
    ("ingly", B),
    ("inism", J),
    ("inity", CC),
    ("ional", A),
    ("ioned", A),
    ("ished", A),
    ("istic", A),
    ("ities", A),
    ("itous", A),
    ("ively", A),
    ("ivity", A),
    ("izers", F),
    ("izing", F),
    ("oidal", A),
    ("oides", A),
    ("otide", A),
    ("ously", A),
    ("able", A),
    ("ably", A),
    ("ages", B),
    ("ally", B),
    ("ance", B),
    ("ancy", B),
    ("ants", B),
    ("aric", A),
    ("arly", K),
    ("ated", I),
    ("ates", A),
    ("atic", B),
    ("ator", A),
    ("ealy", Y),
    ("edly", E),
    ("eful", A),
    ("eity", A),
    ("ence", A),
    ("ency", A),
    ("ened", E),
    ("enly", E),
    ("eous", A),
    ("hood", A),
    ("ials", A),
    ("ians", A),
    ("ible", A),
    ("ibly", A),
    ("ical", A),
    ("ides", L),
    ("iers", A),
    ("iful", A),
    ("ines", M),
    ("ings", N),
    ("ions", B),
    ("ious", A),
    ("isms", B),
    ("ists", A),
    ("itic", H),
    ("ized", F),
    ("izer", F),
    ("less", A),
    ("lily", A),
    ("ness", A),
    ("ogen", A),
    ("ward", A),
    ("wise", A),
    ("ying", B),
    ("yish", A),
    ("acy", A),
    ("age", B),
    ("aic", A),
    ("als", BB),
    ("ant", B),
    ("ars", O),
    ("ary", F),
    ("ata", A),
    ("ate", A),
    ("eal", Y),
    ("ear", Y),
    ("ely", E),
    ("ene", E),
    ("ent", C),
    ("ery", E),
    ("ese", A),
    ("ful", A),
    ("ial", A),
    ("ian", A),
    ("ics", A),
    ("ide", L),
    ("ied", A),
    ("ier", A),
    ("ies", P),
    ("ily", A),
    ("ine", M),
    ("ing", N),
    ("ion", Q),
    ("ish", C),
    ("ism", B),
    ("ist", A),
    ("ite", AA),
    ("ity", A),
    ("ium", A),
    ("ive", A),
    ("ize", F),
    ("oid", A),
    ("one", R),
    ("ous", A),
    ("ae", A),
    ("al", BB),
    ("ar", X),
    ("as", B),
    ("ed", E),
    ("en", F),
    ("es", E),
    ("ia", A),
    ("ic", A),
    ("is", A),
    ("ly", B),
    ("on", S),
    ("or", T),
    ("um", U),
    ("us", V),
    ("yl", R),
    ("'s", A),
    ("s'", A),
    ("a", A),
    ("e", A),
    ("i", A),
    ("o", A),
    ("s", W),
    ("y", B),
];

/// Recoding rules: `(ending, replacement, letters that block the rule when
/// they precede the ending)`. The longest matching ending is the only one
/// tried.
static RECODINGS: &[(&str, &str, &str)] = &[
    ("iev", "ief", ""),
    ("uct", "uc", ""),
    ("umpt", "um", ""),
    ("rpt", "rb", ""),
    ("urs", "ur", ""),
    ("istr", "ister", ""),
    ("metr", "meter", ""),
    ("olv", "olut", ""),
    ("ul", "l", "aoi"),
    ("bex", "bic", ""),
    ("dex", "dic", ""),
    ("pex", "pic", ""),
    ("tex", "tic", ""),
    ("ax", "ac", ""),
    ("ex", "ec", ""),
    ("ix", "ic", ""),
    ("lux", "luc", ""),
    ("uad", "uas", ""),
    ("vad", "vas", ""),
    ("cid", "cis", ""),
    ("lid", "lis", ""),
    ("erid", "eris", ""),
    ("pand", "pans", ""),
    ("end", "ens", "s"),
    ("ond", "ons", ""),
    ("lud", "lus", ""),
    ("rud", "rus", ""),
    ("her", "hes", "pt"),
    ("mit", "mis", ""),
    ("ent", "ens", "m"),
    ("ert", "ers", ""),
    ("et", "es", "n"),
    ("yt", "ys", ""),
    ("yz", "ys", ""),
];

const DOUBLES: &[u8] = b"bdglmnprst";

fn remove_ending(word: &[u8]) -> &[u8] {
    for &(ending, cond) in ENDINGS {
        let ending = ending.as_bytes();
        if word.len() > ending.len() && word.ends_with(ending) {
            let stem = &word[..word.len() - ending.len()];
            if cond.holds(stem) {
                return stem;
            }
        }
    }
    word
}

fn recode(mut stem: Vec<u8>) -> Vec<u8> {
    let len = stem.len();
    if len >= 2 && stem[len - 1] == stem[len - 2] && DOUBLES.contains(&stem[len - 1]) {
        stem.pop();
    }
    let best = RECODINGS
        .iter()
        .filter(|(ending, _, _)| stem.ends_with(ending.as_bytes()))
        .max_by_key(|(ending, _, _)| ending.len());
    if let Some(&(ending, replacement, blockers)) = best {
        let cut = stem.len() - ending.len();
        let blocked = cut > 0 && blockers.as_bytes().contains(&stem[cut - 1]);
        if !blocked {
            stem.truncate(cut);
            stem.extend_from_slice(replacement.as_bytes());
        }
    }
    stem
}

/// Lovins stem of a lowercase token. Tokens shorter than three characters
/// and tokens with non-ASCII characters are returned unchanged.
pub fn lovins_stem(token: &str) -> String {
    if token.len() < 3 || !token.is_ascii() {
        return token.to_owned();
    }
    let stem = remove_ending(token.as_bytes()).to_vec();
    String::from_utf8(recode(stem)).expect("ASCII in, ASCII out")
}
