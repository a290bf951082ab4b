# Dataset files and synthetic corpora
