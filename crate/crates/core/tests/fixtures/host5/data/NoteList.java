class NoteList {
    int size = 0;
    void push() {
        size = size + 1;
    }
}
