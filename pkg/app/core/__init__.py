# Core math: errors, linear algebra, PCA
