# IVF index construction and storage
