//! Bundled word lists for title filtering and query-noun extraction.

/// Lowercase common nouns accepted in article titles alongside capitalized words.
pub const COMMON_NOUNS: &[&str] = &[
    "airplane",
    "animal",
    "apple",
    "bag",
    "ball",
    "banana",
    "bat",
    "bear",
    "bed",
    "bench",
    "bicycle",
    "bike",
    "bird",
    "boat",
    "book",
    "bottle",
    "bowl",
    "box",
    "bread",
    "bridge",
    "broccoli",
    "building",
    "bus",
    "cake",
    "camera",
    "car",
    "carrot",
    "cat",
    "chair",
    "cheese",
    "child",
    "church",
    "city",
    "clock",
    "cloud",
    "coffee",
    "computer",
    "couch",
    "cow",
    "cup",
    "desk",
    "dog",
    "donut",
    "door",
    "elephant",
    "field",
    "fire",
    "fish",
    "flag",
    "flower",
    "food",
    "fork",
    "fruit",
    "game",
    "giraffe",
    "glass",
    "grass",
    "hat",
    "helmet",
    "horse",
    "house",
    "hydrant",
    "kitchen",
    "kite",
    "knife",
    "lamp",
    "laptop",
    "man",
    "meat",
    "motorcycle",
    "mountain",
    "orange",
    "oven",
    "painting",
    "park",
    "people",
    "person",
    "phone",
    "pizza",
    "plane",
    "plate",
    "player",
    "racket",
    "river",
    "road",
    "room",
    "sandwich",
    "sauce",
    "sea",
    "sheep",
    "shirt",
    "sign",
    "sink",
    "skateboard",
    "ski",
    "sky",
    "snow",
    "sofa",
    "soup",
    "spoon",
    "street",
    "suitcase",
    "surfboard",
    "table",
    "tennis",
    "tie",
    "toilet",
    "topping",
    "toppings",
    "tower",
    "town",
    "toy",
    "track",
    "traffic",
    "train",
    "tree",
    "truck",
    "umbrella",
    "vase",
    "vegetable",
    "water",
    "wave",
    "window",
    "woman",
    "zebra",
];

pub const STOPWORDS: &[&str] = &[
    "a",
    "about",
    "after",
    "again",
    "all",
    "also",
    "am",
    "an",
    "and",
    "any",
    "are",
    "as",
    "at",
    "be",
    "because",
    "been",
    "before",
    "being",
    "both",
    "but",
    "by",
    "can",
    "could",
    "did",
    "do",
    "does",
    "doing",
    "down",
    "each",
    "few",
    "for",
    "from",
    "further",
    "had",
    "has",
    "have",
    "having",
    "he",
    "her",
    "here",
    "hers",
    "herself",
    "him",
    "himself",
    "his",
    "i",
    "if",
    "in",
    "into",
    "is",
    "it",
    "its",
    "itself",
    "just",
    "me",
    "more",
    "most",
    "my",
    "myself",
    "no",
    "nor",
    "not",
    "now",
    "of",
    "off",
    "on",
    "once",
    "only",
    "or",
    "other",
    "our",
    "ours",
    "ourselves",
    "out",
    "over",
    "own",
    "s",
    "same",
    "she",
    "should",
    "so",
    "some",
    "such",
    "t",
    "than",
    "that",
    "the",
    "their",
    "theirs",
    "them",
    "themselves",
    "then",
    "there",
    "these",
    "they",
    "this",
    "those",
    "through",
    "to",
    "too",
    "under",
    "until",
    "up",
    "very",
    "was",
    "we",
    "were",
    "will",
    "with",
    "would",
    "you",
    "your",
    "yours",
    "yourself",
    "yourselves",
];

/// Wh-words, auxiliaries, prepositions, determiners and pronouns.
pub const CLOSED_CLASS: &[&str] = &[
    // wh-words
    "what",
    "which",
    "who",
    "whom",
    "whose",
    "why",
    "where",
    "when",
    "how",
    // auxiliaries and modals
    "is",
    "are",
    "was",
    "were",
    "be",
    "been",
    "am",
    "do",
    "does",
    "did",
    "has",
    "have",
    "had",
    "can",
    "could",
    "will",
    "would",
    "shall",
    "should",
    "may",
    "might",
    "must",
    // prepositions
    "above",
    "across",
    "against",
    "along",
    "among",
    "around",
    "behind",
    "below",
    "beneath",
    "beside",
    "between",
    "beyond",
    "during",
    "inside",
    "near",
    "onto",
    "outside",
    "toward",
    "towards",
    "underneath",
    "upon",
    "within",
    "without",
    // determiners and quantifiers
    "another",
    "every",
    "many",
    "much",
    "several",
    "either",
    "neither",
    // pronouns
    "anyone",
    "anything",
    "everyone",
    "everything",
    "one",
    "ones",
    "someone",
    "something",
    "us",
];

/// Frequent verb forms that would otherwise pass as query nouns.
pub const COMMON_VERBS: &[&str] = &[
    "ask", "asking", "carry", "carrying", "catch", "catching", "cook", "cooking", "doing", "drink", "drinking", "eat",
    "eating", "fly", "flying", "go", "going", "hold", "holding", "jump", "jumping", "lay", "laying", "lie", "lying",
    "look", "looking", "made", "make", "making", "play", "playing", "pull", "pulling", "ride", "riding", "run",
    "running", "see", "seen", "shown", "sit", "sitting", "stand", "standing", "take", "taking", "throw", "throwing",
    "use", "used", "using", "walk", "walking", "wear", "wearing", "worn",
];

pub fn is_common_noun(word: &str) -> bool {
    COMMON_NOUNS.contains(&word)
}

pub fn is_query_filler(word: &str) -> bool {
    STOPWORDS.contains(&word) || CLOSED_CLASS.contains(&word) || COMMON_VERBS.contains(&word)
}
