# MRQ approximate nearest neighbor search
