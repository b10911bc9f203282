"""Small programs covering every command form, tagged with the algebras they suit."""

ALL = ("det", "nondet", "prob")
NONDET = ("nondet",)
NO_DET = ("nondet", "prob")

CORPUS = [
    ("skip", "proc main() { skip }", ALL),
    ("assign", "proc main() { x := y + 1 }", ALL),
    ("assign_seq", "proc main() { x := 1; y := x; x := y + x }", ALL),
    ("alloc", "proc main() { x := alloc() }", ALL),
    ("alloc_store", "proc main() { x := alloc(); [x] <- 1 }", ALL),
    ("alloc_twice", "proc main() { x := alloc(); y := alloc(); [x] <- y }", ALL),
    ("free", "proc main() { free(x) }", ALL),
    ("double_free", "proc main() { free(x); free(x) }", ALL),
    ("store", "proc main() { [x] <- 1 }", ALL),
    ("store_var", "proc main() { [x] <- y }", ALL),
    ("load", "proc main() { y <- [x] }", ALL),
    ("load_store", "proc main() { y <- [x]; [y] <- x }", ALL),
    ("swap", "proc main() { a <- [x]; b <- [y]; [x] <- b; [y] <- a }", ALL),
    ("error", "proc main() { error() }", ALL),
    ("error_after", "proc main() { [x] <- 1; error() }", ALL),
    ("assume_eq", "proc main() { assume(x = 1) }", ALL),
    ("assume_neq", "proc main() { assume(x != y); [x] <- y }", ALL),
    ("if_null", "proc main() { if x = null { error() } else { [x] <- 2 } }", ALL),
    ("if_eq", "proc main() { if x = y { skip } else { y := x } }", ALL),
    ("choice", "proc main() { skip + x := 1 }", NONDET),
    ("choice_heap", "proc main() { free(x) + [x] <- 3 }", NONDET),
    ("malloc", "proc main() { x := malloc() }", NONDET),
    ("malloc_write", "proc main() { x := malloc(); [x] <- 1 }", NONDET),
    ("pchoice", "proc main() { x := 1 +[0.5] x := 2 }", ("prob",)),
    ("pchoice_error", "proc main() { [p] <- v +[0.99] error() }", ("prob",)),
    ("pchoice_nested", "proc main() { skip +[0.5] { skip +[0.5] error() } }", ("prob",)),
    ("weight_assume", "proc main() { assume(0.5); x := 1 }", ("prob",)),
    ("while_skip", "proc main() { while x != 0 { x := 0 } }", ALL),
    ("while_count", "proc main() { while x != 0 { x := x - 1 } }", ALL),
    ("while_heap", "proc main() { while x != 0 { y <- [x]; x := 0 } }", ALL),
    ("call", """
proc set(p) { [p] <- 1 }
proc main() { q := alloc(); set(q) }
""", ALL),
    ("call_free", """
proc release(p) { free(p) }
proc main(x) { release(x); [x] <- 1 }
""", ALL),
    ("call_chain", """
proc inner(a) { [a] <- 0 }
proc outer(b) { inner(b); c <- [b] }
proc main(x) { outer(x) }
""", ALL),
    ("call_choice", """
proc maybe(p) { free(p) + skip }
proc main(x) { maybe(x); y <- [x] }
""", NONDET),
    ("vector", """
proc push_back(v) {
  { y <- [v]; free(y); y := alloc(); [v] <- y } + skip
}
proc main(v) { x <- [v]; push_back(v); [x] <- 1 }
""", NONDET),
    ("broadcast", """
proc broadcast(v, p) { [p] <- v +[0.99] error() }
proc main(a) { p := alloc(); broadcast(a, p) }
""", ("prob",)),
]
