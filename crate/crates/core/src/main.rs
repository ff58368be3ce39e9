fn main() {
    println!("physmotion");
}
