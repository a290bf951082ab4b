# Query engine
